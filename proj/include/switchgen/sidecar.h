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

#ifndef SWITCHGEN_SIDECAR_H_
#define SWITCHGEN_SIDECAR_H_

// HTTP service exposing allowed_tokens/advance over per-session automaton
// states, for decoders that live in another process.
//
//   POST   /v1/session  {"pattern"|"schema", "vocab_id"} -> {"session_id", "state", "accept"}
//   POST   /v1/allowed  {"session_id"} -> {"token_ids", "eos_allowed"}
//   POST   /v1/advance  {"session_id", "token_id"} -> {"state", "accept"}
//   DELETE /v1/session  {"session_id"} or /v1/session/<id>
//
// 400 malformed request, 404 unknown session or vocabulary, 409 disallowed
// token, 422 bad pattern or schema.

#include <chrono>
#include <memory>
#include <string>

#include "switchgen/token_index.h"

namespace switchgen {

struct SidecarOptions {
  std::chrono::seconds idle_ttl{300};
  int max_states = 100000;
  int index_threads = 1;
};

class MaskSidecar {
 public:
  explicit MaskSidecar(SidecarOptions options = {});
  ~MaskSidecar();

  MaskSidecar(const MaskSidecar&) = delete;
  MaskSidecar& operator=(const MaskSidecar&) = delete;

  void add_vocabulary(const std::string& vocab_id, std::shared_ptr<const Vocabulary> vocab);
  // Seeds the index cache so sessions on `regex` skip compilation.
  void add_index(const std::string& vocab_id, const std::string& regex,
                 std::shared_ptr<const TokenIndex> index);

  std::size_t session_count() const;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace switchgen

#endif  // SWITCHGEN_SIDECAR_H_
