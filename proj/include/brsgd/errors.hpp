/*
 * Copyright 2026 The BrSGD Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace brsgd {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A GradientSet or config violated its structural invariants.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Constraint 1 and Constraint 2 had no worker in common.
class EmptySurvivorSet : public Error {
 public:
  EmptySurvivorSet() : Error("BrSGD survivor set is empty") {}
};

// Krum needs 2f + 2 < m.
class InsufficientWorkers : public Error {
 public:
  using Error::Error;
};

// Model negation needs at least one honest row to negate.
class NoHonestWorkers : public Error {
 public:
  NoHonestWorkers() : Error("model negation attack requires an honest worker") {}
};

class LabelOutOfRange : public Error {
 public:
  using Error::Error;
};

class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

class TraceTooShort : public Error {
 public:
  using Error::Error;
};

}  // namespace brsgd
