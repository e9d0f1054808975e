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

// JSON wire codec for values crossing service boundaries. Records travel as
// objects whose member names are element keys; labels never appear.

#pragma once

#include "cem/ast.hpp"

#include <json.hpp>

#include <algorithm>
#include <string>
#include <vector>

namespace cem {

using WireValue = nlohmann::ordered_json;

/// Order for key ids: alphabetic prefix, then numeric suffix, so that
/// k2 < k10. Ties fall back to plain string order.
inline bool key_id_less(const std::string& a, const std::string& b) {
    auto split = [](const std::string& s) {
        std::size_t i = s.size();
        while (i > 0 && s[i - 1] >= '0' && s[i - 1] <= '9') {
            --i;
        }
        return i;
    };
    const std::size_t ia = split(a);
    const std::size_t ib = split(b);
    const std::string pa = a.substr(0, ia);
    const std::string pb = b.substr(0, ib);
    if (pa != pb) {
        return pa < pb;
    }
    const std::string na = a.substr(ia);
    const std::string nb = b.substr(ib);
    const std::string ta = na.substr(std::min(na.find_first_not_of('0'), na.size()));
    const std::string tb = nb.substr(std::min(nb.find_first_not_of('0'), nb.size()));
    if (ta.size() != tb.size()) {
        return ta.size() < tb.size();
    }
    if (ta != tb) {
        return ta < tb;
    }
    return a < b;
}

inline WireValue encode_value(const Value& v) {
    switch (v.kind) {
    case Value::Kind::Int:
        return WireValue(v.num);
    case Value::Kind::Str:
        return WireValue(v.str);
    case Value::Kind::Record: {
        std::vector<std::pair<std::string, const Value*>> members;
        for (const auto& f : v.known) {
            members.emplace_back(f.key.id, &f.value);
        }
        for (const auto& f : v.unknown) {
            members.emplace_back(f.key.id, &f.value);
        }
        std::sort(members.begin(), members.end(),
                  [](const auto& a, const auto& b) { return key_id_less(a.first, b.first); });
        WireValue out = WireValue::object();
        for (const auto& [k, m] : members) {
            out[k] = encode_value(*m);
        }
        return out;
    }
    case Value::Kind::Closure:
        break;
    }
    fail(ErrorCode::HigherOrderValue, "function values cannot cross a service boundary");
}

namespace detail {

inline void check_conforms(const Value& v, const Type& t) {
    switch (t.kind) {
    case Type::Kind::Int:
        if (v.kind != Value::Kind::Int) {
            fail(ErrorCode::TypeMismatch, "expected an int");
        }
        return;
    case Type::Kind::String:
        if (v.kind != Value::Kind::Str) {
            fail(ErrorCode::TypeMismatch, "expected a string");
        }
        return;
    case Type::Kind::Record:
        if (!v.is_record()) {
            fail(ErrorCode::TypeMismatch, "expected a record");
        }
        for (const auto& f : t.fields) {
            const Value* m = v.member(f.key);
            if (m == nullptr) {
                fail(ErrorCode::TypeMismatch, "record lacks member " + f.key.id);
            }
            check_conforms(*m, f.type);
        }
        return;
    case Type::Kind::Arrow:
        fail(ErrorCode::HigherOrderValue, "function types cannot cross a service boundary");
    case Type::Kind::Named:
        fail(ErrorCode::TypeMismatch, "unexpanded type " + render_type(t));
    }
}

inline Value decode_untyped(const WireValue& w) {
    if (w.is_number_integer()) {
        return Value::integer(w.get<std::int64_t>());
    }
    if (w.is_string()) {
        return Value::string(w.get<std::string>());
    }
    if (w.is_object()) {
        std::vector<UnknownField> unknown;
        for (const auto& [k, m] : w.items()) {
            unknown.push_back(UnknownField{ElementKey{k}, decode_untyped(m)});
        }
        return Value::record({}, std::move(unknown));
    }
    fail(ErrorCode::MalformedWire, "unsupported wire value " + w.dump());
}

} // namespace detail

/// Encodes `v` after checking it is a first-order value whose known
/// structure matches `declared`.
inline WireValue encode_value(const Value& v, const Type& declared) {
    if (!v.first_order()) {
        fail(ErrorCode::HigherOrderValue, "function values cannot cross a service boundary");
    }
    detail::check_conforms(v, declared);
    return encode_value(v);
}

/// Members whose key appears in `expected` become known fields under the
/// expected labels; all other members become unknown fields.
inline Value decode_value(const WireValue& w, const Type& expected) {
    switch (expected.kind) {
    case Type::Kind::Int:
        if (w.is_number_integer()) {
            return Value::integer(w.get<std::int64_t>());
        }
        if (w.is_number_float()) {
            fail(ErrorCode::MalformedWire, "non-integer number " + w.dump());
        }
        if (w.is_string() || w.is_object()) {
            fail(ErrorCode::TypeMismatch, "expected an int, found " + w.dump());
        }
        break;
    case Type::Kind::String:
        if (w.is_string()) {
            return Value::string(w.get<std::string>());
        }
        if (w.is_number_integer() || w.is_object()) {
            fail(ErrorCode::TypeMismatch, "expected a string, found " + w.dump());
        }
        break;
    case Type::Kind::Record: {
        if (w.is_number_integer() || w.is_string()) {
            fail(ErrorCode::TypeMismatch, "expected a record, found " + w.dump());
        }
        if (!w.is_object()) {
            break;
        }
        std::vector<KnownField> known;
        for (const auto& f : expected.fields) {
            auto it = w.find(f.key.id);
            if (it == w.end()) {
                fail(ErrorCode::MalformedWire, "record lacks member " + f.key.id);
            }
            known.push_back(KnownField{f.label, f.key, decode_value(*it, f.type)});
        }
        std::vector<UnknownField> unknown;
        for (const auto& [k, m] : w.items()) {
            if (expected.field_by_key(ElementKey{k}) == nullptr) {
                unknown.push_back(UnknownField{ElementKey{k}, detail::decode_untyped(m)});
            }
        }
        return Value::record(std::move(known), std::move(unknown));
    }
    case Type::Kind::Arrow:
        fail(ErrorCode::HigherOrderValue, "function types cannot cross a service boundary");
    case Type::Kind::Named:
        fail(ErrorCode::TypeMismatch, "unexpanded type " + render_type(expected));
    }
    fail(ErrorCode::MalformedWire, "unsupported wire value " + w.dump());
}

/// Canonical bytes: compact, members in key order.
inline std::string wire_text(const Value& v) { return encode_value(v).dump(); }

inline WireValue parse_wire(const std::string& text) {
    try {
        return WireValue::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::MalformedWire, e.what());
    }
}

} // namespace cem
