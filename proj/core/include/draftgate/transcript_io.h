// Copyright 2026 The draftgate Authors.
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

// Line-delimited JSON trace format. One session per line with top-level keys
// question, draft, kappa_a, decision, chunks, final, counts (plus mode,
// status and span bookkeeping). Doubles are written in shortest round-trip
// form so parsing a line reproduces the transcript exactly.

#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "draftgate/types.h"

namespace draftgate {

// Single line, no trailing newline.
std::string transcript_to_json_line(const Transcript& t);

// Throws InvalidArgument on malformed input.
Transcript transcript_from_json_line(std::string_view line);

// Reads every non-blank line of a trace stream.
std::vector<Transcript> read_trace(std::istream& in);

// Multi-line human-readable rendering; `pieces[token]` is shown when provided.
std::string render_transcript(const Transcript& t,
                              const std::vector<std::string>* pieces = nullptr);

}  // namespace draftgate
