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

#pragma once

#include <stdexcept>
#include <string>

namespace draftgate {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A transcript's stored fields disagree with its segments.
class CorruptTranscript : public Error {
 public:
  using Error::Error;
};

// Sampling filters removed all probability mass.
class SamplingError : public Error {
 public:
  using Error::Error;
};

// The backend could not answer a query.
class BackendError : public Error {
 public:
  using Error::Error;
};

// The backend does not implement an optional part of the contract.
class UnsupportedOperation : public BackendError {
 public:
  using BackendError::BackendError;
};

// Network-level failure talking to a remote backend (unreachable, timeout).
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

// The remote peer speaks an incompatible or malformed protocol.
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

// The remote server rejected a request with a structured error code.
class RemoteError : public BackendError {
 public:
  RemoteError(std::string code, const std::string& message, bool retryable = false)
      : BackendError(code + ": " + message), code_(std::move(code)), retryable_(retryable) {}

  const std::string& code() const noexcept { return code_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  std::string code_;
  bool retryable_;
};

}  // namespace draftgate
