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

std::string request_of(const RunResult& run, const std::string& remote) {
    for (const auto& t : run.trace) {
        if (t.event.kind == Event::Kind::Invoked && t.event.remote_fn == remote) {
            return t.event.payload;
        }
    }
    return {};
}

TEST(Step, CallByValue) {
    const Module m = parse_module(testing::kLocalModule);
    Expr e = parse_expr("Inc(1 + 2)");
    std::vector<std::string> seen;
    while (!is_value(e)) {
        const StepResult r = step_expr(m, e);
        ASSERT_EQ(r.kind, StepResult::Kind::Step);
        e = r.next;
        seen.push_back(render_expr(e));
    }
    EXPECT_EQ(to_value(e), Value::integer(4));
    ASSERT_GE(seen.size(), 3u);
    // the function position is evaluated first
    EXPECT_EQ(seen[0], "(\\x : int . x + 1)(1 + 2)");
    EXPECT_EQ(seen[1], "(\\x : int . x + 1)(3)");
}

TEST(Step, RecordsSelectAndUpdate) {
    const Module m = parse_module(testing::kLocalModule);
    Expr e = parse_expr("(Make(2) {Tag@k3 = \"x\"}).Tag + \"y\"");
    for (int i = 0; i < 50 && !is_value(e); ++i) {
        e = step_expr(m, e).next;
    }
    EXPECT_EQ(to_value(e), Value::string("xy"));
}

TEST(Step, StuckTermsRaise) {
    const Module m = parse_module(testing::kLocalModule);
    try {
        step_expr(m, parse_expr("1 + \"a\""));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Stuck);
    }
}

TEST(Step, RemoteCallIsReportedToTheSystem) {
    const Module b = testing::sample_module("backoffice_v1.cem");
    const StepResult r = step_expr(b, parse_expr("Save(Facelift(Get(1)))"));
    EXPECT_EQ(r.kind, StepResult::Kind::RemoteCall);
    EXPECT_EQ(r.function, "Get");
    EXPECT_EQ(r.argument, Value::integer(1));
}

// Types are preserved step by step for generated well-typed terms.
TEST(SubjectReduction, GeneratedTerms) {
    const Module m = parse_module(testing::kLocalModule);
    const LocalEnv env = LocalEnv::of(m);
    Rng rng(404);
    testing::TypedGen gen{rng};
    int steps = 0;
    for (int i = 0; i < 600; ++i) {
        const auto target = static_cast<testing::Ty>(rng() % 3);
        Expr e = gen.gen(target, 4, {});
        const Type want = testing::to_type(target);
        ASSERT_EQ(type_of_expr(env, e), want) << render_expr(e);
        for (int fuel = 0; fuel < 500 && !is_value(e); ++fuel) {
            const StepResult r = step_expr(m, e);
            ASSERT_EQ(r.kind, StepResult::Kind::Step) << render_expr(e);
            e = r.next;
            ASSERT_EQ(type_of_expr(env, e), want) << render_expr(e);
            ++steps;
        }
        ASSERT_TRUE(is_value(e)) << render_expr(e);
    }
    EXPECT_GT(steps, 1000);
}

TEST(System, HandshakeAfterEvolution) {
    Registry r = testing::registry_after({{"catalog_v1.cem", "marketing_v1.cem", "backoffice_v1.cem"},
                                           {"catalog_v2.cem", "marketing_v2.cem"}});
    Scheduler s;
    const CallOutcome first = r.call("Backoffice", "Improve", Value::integer(1), s);
    ASSERT_TRUE(first.value);
    EXPECT_EQ(*first.value, Value::string("OK"));
    EXPECT_EQ(first.run.count(Event::Kind::Rejected), 2u);
    EXPECT_EQ(first.run.count(Event::Kind::ProxyGenerated), 2u);
    EXPECT_EQ(request_of(first.run, "Save"), R"({"k2":1,"k3":"HDDPro","k4":99,"k5":5,"k10":"2TB"})");
    EXPECT_EQ(request_of(first.run, "Enhance"), R"({"k2":1,"k3":"HDD","k4":99,"k5":0,"k10":"2TB"})");

    const CallOutcome second = r.call("Backoffice", "Improve", Value::integer(1), s);
    ASSERT_TRUE(second.value);
    EXPECT_EQ(*second.value, Value::string("OK"));
    EXPECT_EQ(second.run.count(Event::Kind::Rejected), 0u);
    EXPECT_EQ(second.run.count(Event::Kind::ProxyGenerated), 0u);
    EXPECT_EQ(r.system().thread_count(), 0u);
}

TEST(System, ListingStateNeedsNoHandshake) {
    Registry r(parse_system(testing::sample_text("settled.ces")));
    Scheduler s;
    const CallOutcome out = r.call("Backoffice", "Improve", Value::integer(7), s);
    ASSERT_TRUE(out.value);
    EXPECT_EQ(*out.value, Value::string("OK"));
    EXPECT_EQ(out.run.count(Event::Kind::Rejected), 0u);
    EXPECT_EQ(out.run.count(Event::Kind::Invoked), 3u);
    EXPECT_EQ(out.run.count(Event::Kind::Resolved), 3u);
}

TEST(System, EveryStateTypechecks) {
    Registry r = testing::registry_after({{"catalog_v1.cem", "marketing_v1.cem", "backoffice_v1.cem"},
                                           {"catalog_v2.cem", "marketing_v2.cem"}});
    Scheduler s(SchedulerPolicy::seeded(3));
    int states = 0;
    r.call("Backoffice", "Improve", Value::integer(1), s, kDefaultFuel, [&](const System& u, const Event&) {
        EXPECT_NO_THROW(check_system(u)) << render_system(u);
        ++states;
    });
    EXPECT_GT(states, 10);
}

TEST(System, DeadlockIsReported) {
    System u;
    Service s;
    s.module = parse_module("module A { defs { fun F@k1 : int -> int = \\x : int . x; } }");
    s.label = DeployLabel{"l1"};
    s.threads.push_back(Thread{ThreadId{1}, ex::add(ex::await(ThreadId{2}), ex::num(1))});
    s.threads.push_back(Thread{ThreadId{2}, ex::add(ex::await(ThreadId{1}), ex::num(1))});
    u.services.push_back(s);
    Scheduler sched;
    const RunResult run = run_to_quiescence(u, sched);
    EXPECT_TRUE(run.deadlocked);
    EXPECT_TRUE(run.exhausted);
    EXPECT_TRUE(run.results.empty());
    EXPECT_EQ(run.steps, 0u);
}

TEST(System, DivergenceRunsOutOfFuel) {
    Registry r;
    ASSERT_TRUE(r.preflight_deploy({parse_module(
                                     "module L { defs { fun Loop@k1 : int -> int = \\x : int . Loop(x); } }")})
                  .accepted);
    Scheduler s;
    const CallOutcome out = r.call("L", "Loop", Value::integer(0), s, 100);
    EXPECT_TRUE(out.run.exhausted);
    EXPECT_FALSE(out.run.deadlocked);
    EXPECT_FALSE(out.value);
    EXPECT_EQ(out.run.steps, 100u);
}

TEST(System, StartAndUndeployErrors) {
    System u;
    auto code = [](auto f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Io;
    };
    EXPECT_EQ(code([&] { start(u, "Nobody", ex::num(1)); }), ErrorCode::UnknownService);
    EXPECT_EQ(code([&] { undeploy(u, {"Nobody"}); }), ErrorCode::UnknownService);
    deploy(u, {parse_module("module A { defs { fun F@k1 : int -> int = \\x : int . x; } }")});
    start(u, "A", ex::apply(ex::fun("F"), ex::num(1)));
    EXPECT_EQ(code([&] { undeploy(u, {"A"}); }), ErrorCode::NotQuiescent);
    EXPECT_EQ(code([&] {
                  deploy(u, {parse_module("module A { defs { fun G@k2 : int -> int = \\x : int . x; } }")});
              }),
              ErrorCode::NotQuiescent);
}

TEST(System, SeededRunsAreReproducible) {
    auto trace_of = [](std::uint64_t seed) {
        Registry r = testing::registry_after({{"catalog_v1.cem", "marketing_v1.cem", "backoffice_v1.cem"},
                                               {"catalog_v2.cem", "marketing_v2.cem"}});
        Scheduler s(SchedulerPolicy::seeded(seed));
        std::string out;
        for (int i = 0; i < 2; ++i) {
            for (const auto& t : r.call("Backoffice", "Improve", Value::integer(i), s).run.trace) {
                out += trace_line(t) + "\n";
            }
        }
        return out;
    };
    for (std::uint64_t seed : {1u, 2u, 99u}) {
        EXPECT_EQ(trace_of(seed), trace_of(seed));
    }
}

TEST(System, SnapshotRoundTrip) {
    const System u = parse_system(testing::sample_text("settled.ces"));
    const System back = system_from_json(system_to_json(u));
    EXPECT_EQ(snapshot_hash(u), snapshot_hash(back));
    EXPECT_EQ(system_to_json(u).dump(), system_to_json(back).dump());
}

} // namespace
} // namespace cem
