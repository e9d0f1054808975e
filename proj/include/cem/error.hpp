// Copyright 2026 The cem Authors
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
#include <string_view>

namespace cem {

enum class ErrorCode {
    // parsing and model invariants
    SyntaxError,
    DuplicateKey,
    DuplicateName,
    ArrowAtBoundary,
    SelfReference,
    // type expansion
    UnresolvedName,
    CyclicType,
    // expression typing
    UnboundName,
    FieldNotFound,
    ArgumentMismatch,
    UpdateKeyMismatch,
    NonRecordSelect,
    UnknownThread,
    CyclicAwait,
    // module / service / system typing
    NameCollision,
    UnresolvedReference,
    RefIncompatible,
    BodyTypeError,
    ProxySignatureMismatch,
    ThreadTypeError,
    // wire codec and adapters
    HigherOrderValue,
    MalformedWire,
    TypeMismatch,
    IrreconcilableShape,
    MissingEndpoint,
    // runtime
    Stuck,
    NotQuiescent,
    UnknownService,
    UnknownFunction,
    ArgumentTypeError,
    FuelExhausted,
    // change analysis
    DuplicateKeyInSchema,
    NegativeCount,
    MalformedLog,
    // tooling
    Io,
    Usage,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::ArrowAtBoundary: return "ArrowAtBoundary";
    case ErrorCode::SelfReference: return "SelfReference";
    case ErrorCode::UnresolvedName: return "UnresolvedName";
    case ErrorCode::CyclicType: return "CyclicType";
    case ErrorCode::UnboundName: return "UnboundName";
    case ErrorCode::FieldNotFound: return "FieldNotFound";
    case ErrorCode::ArgumentMismatch: return "ArgumentMismatch";
    case ErrorCode::UpdateKeyMismatch: return "UpdateKeyMismatch";
    case ErrorCode::NonRecordSelect: return "NonRecordSelect";
    case ErrorCode::UnknownThread: return "UnknownThread";
    case ErrorCode::CyclicAwait: return "CyclicAwait";
    case ErrorCode::NameCollision: return "NameCollision";
    case ErrorCode::UnresolvedReference: return "UnresolvedReference";
    case ErrorCode::RefIncompatible: return "RefIncompatible";
    case ErrorCode::BodyTypeError: return "BodyTypeError";
    case ErrorCode::ProxySignatureMismatch: return "ProxySignatureMismatch";
    case ErrorCode::ThreadTypeError: return "ThreadTypeError";
    case ErrorCode::HigherOrderValue: return "HigherOrderValue";
    case ErrorCode::MalformedWire: return "MalformedWire";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::IrreconcilableShape: return "IrreconcilableShape";
    case ErrorCode::MissingEndpoint: return "MissingEndpoint";
    case ErrorCode::Stuck: return "Stuck";
    case ErrorCode::NotQuiescent: return "NotQuiescent";
    case ErrorCode::UnknownService: return "UnknownService";
    case ErrorCode::UnknownFunction: return "UnknownFunction";
    case ErrorCode::ArgumentTypeError: return "ArgumentTypeError";
    case ErrorCode::FuelExhausted: return "FuelExhausted";
    case ErrorCode::DuplicateKeyInSchema: return "DuplicateKeyInSchema";
    case ErrorCode::NegativeCount: return "NegativeCount";
    case ErrorCode::MalformedLog: return "MalformedLog";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Usage: return "Usage";
    }
    return "Unknown";
}

struct SourceLoc {
    int line = 0;
    int column = 0;

    bool known() const { return line > 0; }
    std::string str() const {
        return std::to_string(line) + ":" + std::to_string(column);
    }
};

/// Every failure in the toolkit is reported as an Error. The optional
/// attribution fields are filled in by whichever layer knows them
/// (the parser knows locations, the system checker knows services).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, SourceLoc loc = {})
      : std::runtime_error(message)
      , code_(code)
      , loc_(loc) {}

    ErrorCode code() const { return code_; }
    const SourceLoc& loc() const { return loc_; }
    const std::string& service() const { return service_; }
    const std::string& key() const { return key_; }

    Error& with_service(std::string name) {
        if (service_.empty()) {
            service_ = std::move(name);
        }
        return *this;
    }
    Error& with_key(std::string key) {
        if (key_.empty()) {
            key_ = std::move(key);
        }
        return *this;
    }
    Error& with_loc(SourceLoc loc) {
        if (!loc_.known()) {
            loc_ = loc;
        }
        return *this;
    }

    /// One-line diagnostic: `code [service] [key] [line:col]: message`.
    std::string describe() const {
        std::string out{to_string(code_)};
        if (!service_.empty()) {
            out += " service=" + service_;
        }
        if (!key_.empty()) {
            out += " key=" + key_;
        }
        if (loc_.known()) {
            out += " at " + loc_.str();
        }
        out += ": ";
        out += what();
        return out;
    }

private:
    ErrorCode code_;
    SourceLoc loc_;
    std::string service_;
    std::string key_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace cem
