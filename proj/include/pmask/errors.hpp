// Copyright 2026 The pmask Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace pmask {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Problem too large for the requested backend.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// An external predictor failed or did not honor its output contract.
class PredictorError : public Error {
 public:
  using Error::Error;
};

/// Coefficient of variation requested on an empty foreground set.
class DegenerateChannel : public Error {
 public:
  using Error::Error;
};

/// Loss requested on a map without a single valid pixel.
class EmptyLoss : public Error {
 public:
  using Error::Error;
};

/// Every class is absent from both ground truth and prediction.
class EmptyEvaluation : public Error {
 public:
  using Error::Error;
};

}  // namespace pmask
