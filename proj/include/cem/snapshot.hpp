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

// Canonical JSON form of a system, used for state hashes and state files.

#pragma once

#include "cem/parser.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <string>

namespace cem {

using Json = nlohmann::ordered_json;

inline Json signature_to_json(const Signature& sig) {
    Json out = Json::array();
    for (const auto& [k, e] : sig.entries) {
        out.push_back(Json{{"key", k.id},
                           {"module", e.module},
                           {"name", e.name},
                           {"kind", e.kind == ElementKind::Type ? "type" : "fun"},
                           {"type", render_type(e.type)}});
    }
    return out;
}

inline Signature signature_from_json(const Json& j) {
    Signature sig;
    for (const auto& e : j) {
        sig.entries[ElementKey{e.at("key").get<std::string>()}] =
          SignatureEntry{e.at("module").get<std::string>(), e.at("name").get<std::string>(),
                         e.at("kind").get<std::string>() == "type" ? ElementKind::Type
                                                                   : ElementKind::Value,
                         parse_type(e.at("type").get<std::string>())};
    }
    return sig;
}

/// Every observable part of the system in a fixed order. Modules appear as
/// rendered source, expressions in display syntax.
inline Json system_to_json(const System& u) {
    Json services = Json::array();
    for (const auto& s : u.services) {
        Json proxies = Json::array();
        for (const auto& p : s.proxies) {
            Json pj{{"producer", p.producer},
                    {"state", p.is_ready() ? "ready" : "outdated"},
                    {"label", p.label.id}};
            if (p.is_ready()) {
                Json entries = Json::array();
                for (const auto& vp : p.entries) {
                    entries.push_back(
                      Json{{"local", vp.local}, {"remote", vp.remote}, {"type", render_type(vp.type)}});
                }
                pj["entries"] = std::move(entries);
            } else {
                pj["signature"] = signature_to_json(p.signature);
            }
            proxies.push_back(std::move(pj));
        }
        Json threads = Json::array();
        for (const auto& t : s.threads) {
            threads.push_back(Json{{"id", t.id.str()}, {"expr", render_expr(t.expr)}});
        }
        services.push_back(Json{{"name", s.name()},
                                {"label", s.label.id},
                                {"module", render_module(s.module)},
                                {"proxies", std::move(proxies)},
                                {"threads", std::move(threads)}});
    }
    return Json{{"next_label", u.next_label},
                {"next_thread", u.next_thread},
                {"services", std::move(services)}};
}

/// Inverse of system_to_json for quiescent systems (no threads).
inline System system_from_json(const Json& j) {
    System u;
    try {
        u.next_label = j.at("next_label").get<std::uint64_t>();
        u.next_thread = j.at("next_thread").get<std::uint64_t>();
        for (const auto& sj : j.at("services")) {
            Service s;
            s.module = parse_module(sj.at("module").get<std::string>());
            s.label = DeployLabel{sj.at("label").get<std::string>()};
            if (s.module.name != sj.at("name").get<std::string>()) {
                fail(ErrorCode::Io, "service name does not match its module");
            }
            for (const auto& pj : sj.at("proxies")) {
                const std::string producer = pj.at("producer").get<std::string>();
                DeployLabel label{pj.at("label").get<std::string>()};
                if (pj.at("state").get<std::string>() == "ready") {
                    std::vector<ValueProxy> entries;
                    for (const auto& ej : pj.at("entries")) {
                        entries.push_back(ValueProxy{ej.at("local").get<std::string>(),
                                                     ej.at("remote").get<std::string>(),
                                                     parse_type(ej.at("type").get<std::string>())});
                    }
                    s.proxies.push_back(Proxy::ready(producer, std::move(entries), std::move(label)));
                } else {
                    s.proxies.push_back(
                      Proxy::outdated(producer, signature_from_json(pj.at("signature")), std::move(label)));
                }
            }
            if (!sj.at("threads").empty()) {
                fail(ErrorCode::Io, "state files hold quiescent systems only");
            }
            u.services.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Io, std::string("malformed state: ") + e.what());
    }
    return u;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// 16 hex digits identifying the full system state.
inline std::string snapshot_hash(const System& u) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(system_to_json(u).dump())));
    return buf;
}

} // namespace cem
