// Copyright 2026 The switchgen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: compile, check, generate, eval, serve, train-ngram.
//
// Exit codes: 0 success (a no-match verdict included), 1 usage, 2 input
// file, 3 engine error.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "switchgen/automata.h"
#include "switchgen/decode.h"
#include "switchgen/error.h"
#include "switchgen/eval.h"
#include "switchgen/lm.h"
#include "switchgen/schema.h"
#include "switchgen/sidecar.h"
#include "switchgen/token_index.h"

namespace {

using namespace switchgen;

constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitEngine = 3;
constexpr int kDefaultPort = 8790;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runs `load` and reports any failure as an input-file problem.
template <typename F>
auto read_input(const std::string& what, F&& load) -> decltype(load()) {
  try {
    return load();
  } catch (const std::exception& e) {
    throw InputError(what + ": " + e.what());
  }
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw InputError(path + " is not valid JSON");
  return doc;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

std::shared_ptr<const Vocabulary> open_vocab(const std::string& path) {
  return read_input("vocabulary " + path,
                    [&] { return std::make_shared<const Vocabulary>(load_vocabulary(path)); });
}

// Inline JSON when the argument starts with '{', a file path otherwise.
AnswerSchema open_schema(const std::string& arg) {
  if (!arg.empty() && arg.front() == '{') {
    const auto doc = nlohmann::json::parse(arg, nullptr, false);
    if (doc.is_discarded()) throw InvalidSchema("schema argument is not valid JSON");
    return AnswerSchema::from_json(doc);
  }
  const auto doc = read_json_file(arg);
  return read_input("schema " + arg, [&] { return AnswerSchema::from_json(doc); });
}

std::string target_regex(const std::string& pattern, const std::string& schema_arg) {
  if (!pattern.empty()) return pattern;
  const AnswerSchema schema = open_schema(schema_arg);
  schema.validate();
  return schema_to_regex(schema);
}

// "scripted:<path>" | "ngram:<model-path>" | "remote:<url>"
std::unique_ptr<LmProvider> open_lm(const std::string& spec,
                                    const std::shared_ptr<const Vocabulary>& vocab) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw InvalidArgument("lm spec needs a kind: " + spec);
  const std::string kind = spec.substr(0, colon);
  const std::string arg = spec.substr(colon + 1);
  if (kind == "scripted") {
    return read_input("script " + arg, [&] {
      return std::unique_ptr<LmProvider>(
          std::make_unique<ScriptedLm>(ScriptedLm::load(arg, vocab)));
    });
  }
  if (kind == "ngram") {
    auto lm = read_input("n-gram model " + arg,
                         [&] { return std::make_unique<NgramLm>(NgramLm::load(arg)); });
    if (lm->vocab_size() != vocab->size() || lm->eos_id() != vocab->eos_id()) {
      throw InputError("n-gram model " + arg + " was trained on a different vocabulary");
    }
    return lm;
  }
  if (kind == "remote") return std::make_unique<RemoteLm>(arg, vocab->size(), vocab->eos_id());
  throw InvalidArgument("unknown lm kind '" + kind + "' (scripted, ngram, remote)");
}

struct SamplerFlags {
  std::string strategy = "greedy";
  double temperature = 1.0;
  int top_k = 1;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--sampler", strategy, "greedy, temperature or top_k")
        ->check(CLI::IsMember({"greedy", "temperature", "top_k"}));
    cmd->add_option("--temperature", temperature, "Sampling temperature");
    cmd->add_option("--top-k", top_k, "Candidates kept by top_k");
    cmd->add_option("--seed", seed, "RNG seed");
  }

  SamplerConfig config() const {
    SamplerConfig c;
    if (strategy == "temperature") c = SamplerConfig::with_temperature(temperature, seed);
    if (strategy == "top_k") c = SamplerConfig::with_top_k(top_k, temperature, seed);
    c.seed = seed;
    c.validate();
    return c;
  }
};

MaskSidecar* g_sidecar = nullptr;

void handle_signal(int) {
  if (g_sidecar) g_sidecar->stop();
}

int default_port() {
  if (const char* env = std::getenv("SWITCHGEN_PORT")) {
    try {
      return std::stoi(env);
    } catch (const std::exception&) {
    }
  }
  return kDefaultPort;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"switchgen: free reasoning, then automaton-guided answers"};
  app.require_subcommand(1);
  bool json_out = false;

  // compile
  auto* compile_cmd = app.add_subcommand("compile", "Compile a regex or schema to DFA + index");
  std::string c_regex, c_schema, c_vocab, c_out;
  int c_threads = 1;
  int c_max_states = 100000;
  bool c_no_minimize = false;
  auto* c_regex_opt = compile_cmd->add_option("--regex", c_regex, "Regular expression");
  auto* c_schema_opt = compile_cmd->add_option("--schema", c_schema, "Schema file or inline JSON");
  c_regex_opt->excludes(c_schema_opt);
  compile_cmd->add_option("--vocab", c_vocab, "Vocabulary file")->required();
  compile_cmd->add_option("--out", c_out, "Output prefix (<out>.dfa.json, <out>.index.json)")
      ->required();
  compile_cmd->add_option("--threads", c_threads, "Index build threads");
  compile_cmd->add_option("--max-states", c_max_states, "DFA state limit");
  compile_cmd->add_flag("--no-minimize", c_no_minimize, "Skip minimization");
  compile_cmd->add_flag("--json", json_out, "Machine-readable output");

  // check
  auto* check_cmd = app.add_subcommand("check", "Full-match TEXT against PATTERN");
  std::string k_pattern, k_text;
  check_cmd->add_option("pattern", k_pattern, "Regular expression")->required();
  check_cmd->add_option("text", k_text, "Text to test")->required();
  check_cmd->add_flag("--json", json_out, "Machine-readable output");

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Decode one prompt");
  std::string g_prompt, g_prompt_file, g_pattern, g_schema, g_vocab, g_lm, g_trace;
  std::string g_method = "hybrid";
  std::vector<std::string> g_triggers = {"{"};
  bool g_no_eos_trigger = false, g_eos_only = false;
  int g_max_new = 256;
  std::optional<int> g_preamble;
  SamplerFlags g_sampler;
  auto* g_prompt_opt = gen_cmd->add_option("--prompt", g_prompt, "Prompt text");
  auto* g_prompt_file_opt = gen_cmd->add_option("--prompt-file", g_prompt_file, "Prompt file");
  g_prompt_opt->excludes(g_prompt_file_opt);
  auto* g_pattern_opt = gen_cmd->add_option("--pattern", g_pattern, "Answer regex");
  auto* g_schema_opt = gen_cmd->add_option("--schema", g_schema, "Schema file or inline JSON");
  g_pattern_opt->excludes(g_schema_opt);
  gen_cmd->add_option("--vocab", g_vocab, "Vocabulary file")->required();
  gen_cmd->add_option("--lm", g_lm, "scripted:<path> | ngram:<path> | remote:<url>")->required();
  gen_cmd->add_option("--method", g_method, "natural, constrained or hybrid")
      ->check(CLI::IsMember({"natural", "constrained", "hybrid"}));
  gen_cmd->add_option("--trigger", g_triggers, "Trigger token text (repeatable)");
  gen_cmd->add_flag("--no-eos-trigger", g_no_eos_trigger, "EOS ends the session instead");
  gen_cmd->add_flag("--eos-only", g_eos_only, "EOS is the only trigger");
  gen_cmd->add_option("-L,--max-new-tokens", g_max_new, "Sampling step budget");
  gen_cmd->add_option("--preamble-budget", g_preamble, "Preamble token budget");
  g_sampler.attach(gen_cmd);
  gen_cmd->add_option("--trace", g_trace, "Write a JSON-lines trace here");
  gen_cmd->add_flag("--json", json_out, "Machine-readable output");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Run the variation grid over a task file");
  std::string e_task, e_vocab, e_lm, e_out, e_style = "base", e_method = "hybrid";
  std::string e_model = "lm";
  int e_shots = 0, e_threads = 1, e_max_new = 256;
  std::optional<int> e_preamble;
  std::vector<std::string> e_triggers = {"{"};
  bool e_no_eos_trigger = false, e_strict = false, e_strip_sep = false, e_compare = false;
  SamplerFlags e_sampler;
  eval_cmd->add_option("--task", e_task, "Task file")->required();
  eval_cmd->add_option("--vocab", e_vocab, "Vocabulary file")->required();
  eval_cmd->add_option("--lm", e_lm, "scripted:<path> | ngram:<path> | remote:<url>")->required();
  eval_cmd->add_option("--out", e_out, "Report file")->required();
  eval_cmd->add_option("--style", e_style, "base, instruct_format or better_format")
      ->check(CLI::IsMember({"base", "instruct_format", "better_format", "if", "bf"}));
  eval_cmd->add_option("--shots", e_shots, "Few-shot examples");
  eval_cmd->add_option("--method", e_method, "natural, constrained or hybrid")
      ->check(CLI::IsMember({"natural", "constrained", "hybrid"}));
  eval_cmd->add_option("--model", e_model, "Model label for report rows");
  eval_cmd->add_option("--threads", e_threads, "Concurrent items");
  eval_cmd->add_option("-L,--max-new-tokens", e_max_new, "Sampling step budget");
  eval_cmd->add_option("--preamble-budget", e_preamble, "Preamble token budget");
  eval_cmd->add_option("--trigger", e_triggers, "Trigger token text (repeatable)");
  eval_cmd->add_flag("--no-eos-trigger", e_no_eos_trigger, "EOS ends the session instead");
  eval_cmd->add_flag("--strict", e_strict, "No answer normalization");
  eval_cmd->add_flag("--strip-separators", e_strip_sep, "Ignore '-' and spaces in contains_gold");
  eval_cmd->add_flag("--compare-natural", e_compare,
                     "Also run natural decoding and write the token/time comparison");
  e_sampler.attach(eval_cmd);
  eval_cmd->add_flag("--json", json_out, "Print the report on stdout");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Serve the mask sidecar over HTTP");
  std::string s_host = "127.0.0.1";
  int s_port = default_port();
  int s_ttl = 300;
  std::vector<std::string> s_vocabs;
  serve_cmd->add_option("--host", s_host, "Bind address");
  serve_cmd->add_option("--port", s_port, "Port (default from SWITCHGEN_PORT)");
  serve_cmd->add_option("--vocab", s_vocabs, "id=path (repeatable); a bare path is id 'default'")
      ->required();
  serve_cmd->add_option("--ttl", s_ttl, "Idle session lifetime in seconds");

  // train-ngram
  auto* train_cmd = app.add_subcommand("train-ngram", "Train an n-gram model on a corpus");
  std::string t_corpus, t_vocab, t_out;
  int t_order = 3;
  bool t_eos_per_line = false;
  train_cmd->add_option("--corpus", t_corpus, "Corpus text file")->required();
  train_cmd->add_option("--vocab", t_vocab, "Vocabulary file")->required();
  train_cmd->add_option("--out", t_out, "Model file")->required();
  train_cmd->add_option("--order", t_order, "n (2 to 4)");
  train_cmd->add_flag("--eos-per-line", t_eos_per_line, "Each line ends in EOS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (compile_cmd->parsed()) {
      if (c_regex.empty() && c_schema.empty()) throw CLI::RequiredError("--regex or --schema");
      const auto vocab = open_vocab(c_vocab);
      const std::string regex = target_regex(c_regex, c_schema);
      CompileOptions options;
      options.minimize = !c_no_minimize;
      options.max_states = c_max_states;
      const Dfa dfa = compile(parse_regex(regex), options);
      const TokenIndex index = build_index(dfa, *vocab, c_threads);
      const std::string dfa_path = c_out + ".dfa.json";
      const std::string index_path = c_out + ".index.json";
      write_file(dfa_path, dfa.to_json().dump(1) + "\n");
      write_file(index_path, index.to_json().dump() + "\n");
      if (json_out) {
        nlohmann::ordered_json out;
        out["regex"] = regex;
        out["states"] = dfa.num_states();
        out["dfa_hash"] = index.dfa_hash();
        out["dfa_path"] = dfa_path;
        out["index_path"] = index_path;
        std::cout << out.dump() << '\n';
      } else {
        std::cout << "regex: " << regex << "\nstates: " << dfa.num_states()
                  << "\ndfa_hash: " << index.dfa_hash() << "\nwrote " << dfa_path << " and "
                  << index_path << '\n';
      }
    } else if (check_cmd->parsed()) {
      const Dfa dfa = compile(parse_regex(k_pattern));
      const bool match = dfa.accepts(k_text);
      if (json_out) {
        nlohmann::ordered_json out;
        out["pattern"] = k_pattern;
        out["text"] = k_text;
        out["match"] = match;
        std::cout << out.dump() << '\n';
      } else {
        std::cout << (match ? "match" : "no-match") << '\n';
      }
    } else if (gen_cmd->parsed()) {
      if (g_prompt_file.empty() && !g_prompt_opt->count()) {
        throw CLI::RequiredError("--prompt or --prompt-file");
      }
      std::string prompt_text = g_prompt;
      if (!g_prompt_file.empty()) {
        std::ifstream in(g_prompt_file);
        if (!in) throw InputError("cannot open " + g_prompt_file);
        prompt_text.assign(std::istreambuf_iterator<char>(in), {});
      }
      const auto vocab = open_vocab(g_vocab);
      const auto lm = open_lm(g_lm, vocab);
      const Method method = parse_method(g_method);
      std::optional<TokenIndex> index;
      if (method != Method::kNatural) {
        if (g_pattern.empty() && g_schema.empty()) {
          throw CLI::RequiredError("--pattern or --schema");
        }
        index = build_index(compile(parse_regex(target_regex(g_pattern, g_schema))), *vocab);
      }
      DecodeOptions options;
      options.max_new_tokens = g_max_new;
      options.preamble_budget = g_preamble;
      options.sampler = g_sampler.config();
      options.record_trace = !g_trace.empty();
      const Decoder decoder(*lm, *vocab, index ? &*index : nullptr);
      const auto prompt = vocab->tokenize(prompt_text);
      DecodeResult result;
      if (method == Method::kNatural) {
        result = decoder.free_generate(prompt, options);
      } else if (method == Method::kConstrained) {
        result = decoder.masked_generate(prompt, options);
      } else {
        const TriggerSet triggers =
            g_eos_only ? TriggerSet::eos_only()
                       : TriggerSet::from_texts(*vocab, g_triggers, !g_no_eos_trigger);
        result = decoder.hybrid_generate(prompt, triggers, options);
      }
      if (!g_trace.empty()) {
        std::ofstream trace(g_trace);
        if (!trace) throw InputError("cannot write " + g_trace);
        result.write_trace(trace);
      }
      if (json_out) {
        std::cout << result.to_json().dump() << '\n';
      } else {
        std::cout << result.text << '\n'
                  << "preamble_tokens=" << result.preamble_tokens
                  << " constrained_tokens=" << result.constrained_tokens
                  << " total_tokens=" << result.total_tokens
                  << " termination=" << termination_name(result.termination) << '\n';
      }
    } else if (eval_cmd->parsed()) {
      const auto vocab = open_vocab(e_vocab);
      const TaskSpec task = read_input("task " + e_task, [&] { return TaskSpec::load(e_task); });
      const auto lm = open_lm(e_lm, vocab);
      const PromptStyle style{parse_prompt_kind(e_style), e_shots};
      EvalConfig config;
      config.method = parse_method(e_method);
      config.decode.max_new_tokens = e_max_new;
      config.decode.preamble_budget = e_preamble;
      config.decode.sampler = e_sampler.config();
      config.trigger_texts = e_triggers;
      config.trigger_on_eos = !e_no_eos_trigger;
      if (e_strict) config.normalization = Normalization::strict();
      config.normalization.strip_separators = e_strip_sep;
      config.seed = e_sampler.seed;
      config.threads = e_threads;
      config.model = e_model;
      const EvalReport report = run_grid(task, style, config, *lm, *vocab);
      write_file(e_out, report.to_json().dump(1) + "\n");
      std::optional<OverheadReport> overhead;
      if (e_compare) {
        EvalConfig natural_config = config;
        natural_config.method = Method::kNatural;
        const EvalReport natural = run_grid(task, style, natural_config, *lm, *vocab);
        overhead = compare_overhead(natural, report);
        const std::string stem = e_out.size() > 5 && e_out.ends_with(".json")
                                     ? e_out.substr(0, e_out.size() - 5)
                                     : e_out;
        write_file(stem + ".natural.json", natural.to_json().dump(1) + "\n");
        write_file(stem + ".overhead.json", overhead_to_json(*overhead).dump(1) + "\n");
      }
      if (json_out) {
        std::cout << report.to_json().dump() << '\n';
      } else {
        std::cout << task.name << " " << method_name(config.method) << "/"
                  << prompt_kind_name(style.kind) << " k=" << style.shots << ": mean "
                  << report.mean << " std " << report.std_dev << " contains_gold "
                  << report.contains_gold_rate << "%\n";
        for (const auto& row : report.grid) {
          for (std::size_t j = 0; j < row.size(); ++j) std::cout << (j ? " " : "") << row[j];
          std::cout << '\n';
        }
        if (overhead) std::cout << format_overhead_table(overhead->rows);
      }
    } else if (serve_cmd->parsed()) {
      SidecarOptions options;
      options.idle_ttl = std::chrono::seconds(s_ttl);
      MaskSidecar sidecar(options);
      for (const auto& entry : s_vocabs) {
        const auto eq = entry.find('=');
        const std::string id = eq == std::string::npos ? "default" : entry.substr(0, eq);
        const std::string path = eq == std::string::npos ? entry : entry.substr(eq + 1);
        sidecar.add_vocabulary(id, open_vocab(path));
      }
      g_sidecar = &sidecar;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cerr << "serving on " << s_host << ":" << s_port << '\n';
      sidecar.listen(s_host, s_port);
      g_sidecar = nullptr;
    } else if (train_cmd->parsed()) {
      const auto vocab = open_vocab(t_vocab);
      NgramTrainOptions options;
      options.order = t_order;
      options.eos_per_line = t_eos_per_line;
      const NgramLm lm = read_input("corpus " + t_corpus,
                                    [&] { return NgramLm::train_file(t_corpus, *vocab, options); });
      lm.save(t_out);
      std::cout << "wrote " << t_out << '\n';
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitEngine;
  }
  return 0;
}
