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

#include "support.hpp"

#include <gtest/gtest.h>

namespace cem {
namespace {

using testing::Rng;

const char* kProductV1 = "{Id@k2 : int, Name@k3 : string, Amount@k4 : int, Discount@k5 : int}";
const char* kProductV2 = "{Id@k2 : int, Name@k3 : string, Price@k4 : int, Discount@k5 : int, Desc@k10 : string}";

TEST(Convert, NewToOldKeepsUnknownField) {
    const Value v2 = parse_value(R"({Id@k2 = 1, Name@k3 = "HDD", Price@k4 = 99, Discount@k5 = 0, Desc@k10 = "2TB"})");
    const Value v1 = convert(v2, parse_type(kProductV2), parse_type(kProductV1));
    EXPECT_EQ(render_value(v1), R"({Id@k2 = 1, Name@k3 = "HDD", Amount@k4 = 99, Discount@k5 = 0, #k10 = "2TB"})");
    const Value back = convert(v1, parse_type(kProductV1), parse_type(kProductV2));
    EXPECT_EQ(back, v2);
    EXPECT_EQ(wire_text(v1), R"({"k2":1,"k3":"HDD","k4":99,"k5":0,"k10":"2TB"})");
}

TEST(Convert, MissingKeysGetDefaults) {
    const Value v3 = parse_value(R"({Id@k2 = 1, Name@k3 = "HDD", Price@k4 = 99, Desc@k10 = "2TB"})");
    const Type t3 = parse_type("{Id@k2 : int, Name@k3 : string, Price@k4 : int, Desc@k10 : string}");
    const Value v1 = convert(v3, t3, parse_type(kProductV1));
    ASSERT_NE(v1.member(key("k5")), nullptr);
    EXPECT_EQ(*v1.member(key("k5")), Value::integer(0));
    EXPECT_EQ(*v1.member(key("k10")), Value::string("2TB"));
}

TEST(Convert, DefaultValues) {
    EXPECT_EQ(default_value(Type::integer()), Value::integer(0));
    EXPECT_EQ(default_value(Type::string()), Value::string(""));
    EXPECT_EQ(render_value(default_value(parse_type("{A@k1 : int, B@k2 : {C@k3 : string}}"))),
              R"({A@k1 = 0, B@k2 = {C@k3 = ""}})");
    EXPECT_THROW(default_value(parse_type("int -> int")), Error);
}

TEST(Convert, FunctionsAreWrapped) {
    const Type from = Type::arrow(parse_type(kProductV2), Type::string());
    const Type to = Type::arrow(parse_type(kProductV1), Type::string());
    const Value f = Value::closure("p", parse_type(kProductV2), ex::str("OK"), "Catalog");
    const Value g = convert(f, from, to);
    ASSERT_EQ(g.kind, Value::Kind::Closure);
    EXPECT_EQ(g.param_type, parse_type(kProductV1));
    EXPECT_EQ(g.body->kind, ExprNode::Kind::Convert);
}

TEST(Convert, ShapeErrors) {
    EXPECT_THROW(convert(Value::integer(1), Type::integer(), Type::string()), Error);
    EXPECT_THROW(convert(Value::integer(1), Type::integer(), parse_type("{A@k1 : int}")), Error);
}

TEST(Plan, DescribesEachKey) {
    const AdapterPlan plan = plan_adapter(parse_type("{A@k1 : int, B@k2 : {X@k5 : int}, C@k3 : int}"),
                                          parse_type("{B@k2 : {X@k5 : int, Y@k6 : int}, A@k1 : int, D@k4 : string}"));
    ASSERT_EQ(plan.actions.size(), 4u);
    EXPECT_TRUE(std::holds_alternative<RecurseAction>(plan.actions[0]));
    EXPECT_TRUE(std::holds_alternative<KeepAction>(plan.actions[1]));
    EXPECT_TRUE(std::holds_alternative<DefaultAction>(plan.actions[2]));
    ASSERT_TRUE(std::holds_alternative<PreserveUnknownAction>(plan.actions[3]));
    EXPECT_EQ(std::get<PreserveUnknownAction>(plan.actions[3]).key, key("k3"));
}

TEST(Proxies, ResolvedByKey) {
    const Module b = testing::sample_module("backoffice_v1.cem");
    Signature phi = signature_of(testing::sample_module("marketing_v2.cem"));
    const auto entries = gen_proxies("Marketing", b.ref_for("Marketing")->items, phi);
    ASSERT_EQ(entries.size(), 1u);
    EXPECT_EQ(entries[0].local, "Facelift");
    EXPECT_EQ(entries[0].remote, "Enhance");
    EXPECT_EQ(render_type(entries[0].type),
              std::string(kProductV1) + " -> " + kProductV1);
    try {
        gen_proxies("Catalog", b.ref_for("Catalog")->items, phi);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingEndpoint);
    }
}

TEST(Wire, CanonicalOrder) {
    const Value v = parse_value("{B@k10 = 1, A@k2 = {Z@k9 = \"a\", Y@k3 = 2}}");
    EXPECT_EQ(wire_text(v), R"({"k2":{"k3":2,"k9":"a"},"k10":1})");
}

TEST(Wire, Errors) {
    const Type t = parse_type("{A@k1 : int}");
    auto code = [](auto f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Io;
    };
    EXPECT_EQ(code([&] { decode_value(parse_wire("{}"), t); }), ErrorCode::MalformedWire);
    EXPECT_EQ(code([&] { decode_value(parse_wire(R"({"k1":"x"})"), t); }), ErrorCode::TypeMismatch);
    EXPECT_EQ(code([&] { decode_value(parse_wire(R"({"k1":1.5})"), t); }), ErrorCode::MalformedWire);
    EXPECT_EQ(code([&] { parse_wire("{"); }), ErrorCode::MalformedWire);
    EXPECT_EQ(code([&] { decode_value(parse_wire("[1]"), Type::integer()); }), ErrorCode::MalformedWire);
    EXPECT_EQ(code([&] { encode_value(Value::closure("x", Type::integer(), ex::var("x"), "M")); }),
              ErrorCode::HigherOrderValue);
    EXPECT_EQ(code([&] { encode_value(Value::integer(1), Type::string()); }), ErrorCode::TypeMismatch);
}

TEST(Wire, RoundTripGeneratedValues) {
    Rng rng(31);
    testing::KeyPool keys;
    int n = 0;
    for (int i = 0; i < 1500; ++i) {
        const Type t = testing::random_base_type(rng, keys, 3);
        const Value v = i % 2 ? testing::random_value(rng, t) : testing::random_value_with_unknowns(rng, t, keys);
        const std::string bytes = encode_value(v, t).dump();
        const Value back = decode_value(parse_wire(bytes), t);
        ASSERT_EQ(back, v) << bytes;
        // identical input gives identical bytes
        ASSERT_EQ(encode_value(back, t).dump(), bytes);
        ASSERT_EQ(wire_text(v), bytes);
        ++n;
    }
    EXPECT_GE(n, 1000);
}

// Old to new and back keeps the value on the new type's keys; keys only the
// old type has come back as unknown members holding their defaults.
TEST(RoundTrip, ConversionConservesFields) {
    Rng rng(2026);
    int checked = 0;
    for (int i = 0; i < 1500; ++i) {
        testing::KeyPool keys;
        const Type old_type = testing::random_record_type(rng, keys, 3);
        KeySet mu;
        for (const auto& k : testing::field_keys(old_type)) {
            if (rng() % 2) {
                mu.insert(k);
            }
        }
        const Type new_type = testing::evolve_compatible(rng, old_type, mu, keys);
        ASSERT_TRUE(type_compatible(old_type, new_type, mu));
        const Value v = testing::random_value_with_unknowns(rng, new_type, keys);
        const Value there = convert(v, new_type, old_type);
        const Value back = convert(there, old_type, new_type);
        ASSERT_TRUE(testing::round_trip_matches(v, back, old_type, new_type))
          << render_type(old_type) << "\n" << render_type(new_type) << "\n" << render_value(v) << "\n"
          << render_value(back);
        ++checked;
    }
    EXPECT_GE(checked, 1000);
}

} // namespace
} // namespace cem
