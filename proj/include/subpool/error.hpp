/*
 * Copyright 2026 The subpool Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
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
#include <string_view>

namespace subpool {

/// Broad error category; the CLI maps these onto exit codes.
enum class ErrorKind {
    Shape,
    Domain,
    Format,
    Io,
    Config,
    Numeric,
    State,
    Insertion,
    Degeneracy,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Format: return "format";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::State: return "state";
    case ErrorKind::Insertion: return "insertion";
    case ErrorKind::Degeneracy: return "degeneracy";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define SUBPOOL_DEFINE_ERROR(Name, Kind)                                 \
    class Name : public Error {                                          \
    public:                                                              \
        explicit Name(const std::string& what) : Error(Kind, what) {}    \
    };

SUBPOOL_DEFINE_ERROR(ShapeError, ErrorKind::Shape)
SUBPOOL_DEFINE_ERROR(DomainError, ErrorKind::Domain)
SUBPOOL_DEFINE_ERROR(FormatError, ErrorKind::Format)
SUBPOOL_DEFINE_ERROR(IoError, ErrorKind::Io)
SUBPOOL_DEFINE_ERROR(ConfigError, ErrorKind::Config)
SUBPOOL_DEFINE_ERROR(NumericError, ErrorKind::Numeric)
SUBPOOL_DEFINE_ERROR(StateError, ErrorKind::State)
SUBPOOL_DEFINE_ERROR(InsertionError, ErrorKind::Insertion)
SUBPOOL_DEFINE_ERROR(DegeneracyError, ErrorKind::Degeneracy)

#undef SUBPOOL_DEFINE_ERROR

} // namespace subpool
