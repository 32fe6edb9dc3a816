#include <doctest.h>

#include <sstream>

#include "msw/error.hpp"
#include "support.hpp"

using namespace msw;
using namespace msw::testing;

TEST_SUITE("apps")
{
    TEST_CASE("net text form round trips")
    {
        const NetSpec s = NetSpec::parse(read_corpus("pyramid.net"));
        CHECK(s.inputs.size() == 2);
        CHECK(s.nodes.size() == 4);
        CHECK(s.links.size() == 6);
        CHECK(NetSpec::parse(s.to_string()) == s);
    }

    TEST_CASE("net spec errors")
    {
        CHECK_THROWS_AS(NetSpec::parse("node a 1 xor\n"), SpecError);
        CHECK_THROWS_AS(NetSpec::parse("node a 1 and\nlink b a 0\n"), SpecError);
        CHECK_THROWS_AS(NetSpec::parse("input s\nnode a 1 and\nlink s a 1\n"), SpecError);
        CHECK_THROWS_AS(NetSpec::parse("node a 1 and\nnode a 2 or\n"), SpecError);
        CHECK_THROWS_AS(NetSpec::parse("wire a b\n"), SpecError);
        CHECK_THROWS_AS(NetSpec::parse("output z\n"), SpecError);
    }

    TEST_CASE("pyramid fires per the oracle")
    {
        const NetSpec s = NetSpec::parse(read_corpus("pyramid.net"));
        CHECK(net_oracle(s, {"s1", "s2"}) == std::set<std::string>{"a", "b", "c", "d"});
        CHECK(net_oracle(s, {"s2"}) == std::set<std::string>{"b"});
        CHECK(net_oracle(s, {"s1"}) == std::set<std::string>{"a", "d"});
        for (unsigned b = 0; b < 4; ++b) {
            const auto stim = stimulus_from_bits(s, b);
            const NetRun r = run_net(s, MachineShape::default_shape(), stim);
            CHECK(r.result.status == RunStatus::Completed);
            CHECK(r.fired == net_oracle(s, stim));
        }
    }

    TEST_CASE("firing is visible in the output stream")
    {
        const NetSpec s = NetSpec::parse(read_corpus("pyramid.net"));
        const NetRun r = run_net(s, MachineShape::default_shape(), {"s1"});
        std::set<std::string> lines(r.result.output.begin(), r.result.output.end());
        CHECK(lines == std::set<std::string>{"fired a", "fired d"});
    }

    TEST_CASE("unknown stimulus and oversize nets are rejected")
    {
        const NetSpec s = NetSpec::parse(read_corpus("pyramid.net"));
        CHECK_THROWS_AS(run_net(s, MachineShape::default_shape(), {"zz"}), SpecError);
        CHECK_THROWS_AS(compile_net(s, MachineShape::uniform(2, 10, 1)), CapacityError);
    }

    TEST_CASE("random nets agree with the oracle on every stimulus")
    {
        std::mt19937 rng(3);
        for (int i = 0; i < 60; ++i) {
            const NetSpec s = random_dag(rng, 1 + static_cast<int>(rng() % 6), 1 + static_cast<int>(rng() % 3));
            for (unsigned b = 0; b < (1U << s.inputs.size()); ++b) {
                const auto stim = stimulus_from_bits(s, b);
                for (int p : {1, 8}) {
                    MachineShape shape = net_shape(s);
                    shape.procs = p;
                    const NetRun r = run_net(s, shape, stim);
                    REQUIRE(r.result.status == RunStatus::Completed);
                    REQUIRE_MESSAGE(r.fired == net_oracle(s, stim), s.to_string());
                }
            }
        }
    }

    TEST_CASE("promote to top makes the node follow the stimulus")
    {
        const NetSpec s = NetSpec::parse(read_corpus("pyramid.net"));
        const NetSpec t = reconfigure(s, promote_to_top(s, "c", "s2"));
        CHECK(run_net(t, MachineShape::default_shape(), {"s2"}).fired.count("c") == 1);
        CHECK(run_net(t, MachineShape::default_shape(), {"s1"}).fired.count("c") == 0);
        CHECK_THROWS_AS(promote_to_top(s, "zz", "s1"), SpecError);
        CHECK_THROWS_AS(reconfigure(s, {{NetLink{"s1", "b", 0}, std::nullopt}}), SpecError);
    }

    TEST_CASE("records parse from JSON lines")
    {
        std::istringstream in(read_corpus("records.jsonl"));
        const auto recs = read_records(in);
        REQUIRE(recs.size() == 5);
        CHECK(recs[0].id == 1);
        CHECK(recs[0].fields.at("city") == "oslo");
        CHECK(parse_record(R"({"id": 9, "fields": {"n": 3}})").fields.at("n") == "3");
        CHECK_THROWS_AS(parse_record("{\"fields\": {}}"), SpecError);
        CHECK_THROWS_AS(parse_record("not json"), SpecError);
    }

    TEST_CASE("insert and delete keep every index consistent")
    {
        std::mt19937 rng(12);
        DbState db(db_fields());
        for (RecordId id = 1; id <= 30; ++id) {
            const DbUpdate u = db_update(db, DbOp::Insert, random_record(rng, id));
            db = u.state;
            REQUIRE(db.invariants_hold());
        }
        CHECK(db.records().size() == 30);
        for (RecordId id = 1; id <= 30; id += 3) {
            db = db_update(db, DbOp::Delete, DbRecord{id, {}}).state;
            REQUIRE(db.invariants_hold());
            CHECK_FALSE(db.records().count(id));
        }
        CHECK(db.records().size() == 20);
    }

    TEST_CASE("update errors leave the database unchanged")
    {
        DbState db(db_fields());
        db = db_update(db, DbOp::Insert, DbRecord{1, {{"dept", "eng"}}}).state;
        const DbState before = db;
        CHECK_THROWS_AS(db_update(db, DbOp::Insert, DbRecord{1, {}}), UpdateError);
        CHECK_THROWS_AS(db_update(db, DbOp::Delete, DbRecord{2, {}}), UpdateError);
        CHECK(db == before);
        CHECK(db.value(1, "city").empty());
        CHECK(db.matches("city", "").count(1) == 1);
        CHECK_THROWS_AS(DbState({"bad-name"}), SpecError);
    }

    TEST_CASE("composite search matches the scan on the sample records")
    {
        std::istringstream in(read_corpus("records.jsonl"));
        DbState db(db_fields());
        for (const auto& r : read_records(in))
            db = db_update(db, DbOp::Insert, r).state;
        const Fields key{{"dept", "eng"}, {"city", "oslo"}};
        const DbSearch s = db_search_composite(db, key);
        CHECK(s.ids == std::set<RecordId>{1, 3, 5});
        CHECK(s.ids == db.scan(key));
        CHECK(db_search_composite(db, {{"dept", "none"}}).ids.empty());
        CHECK_THROWS_AS(db_search_composite(db, {}), SearchError);
        CHECK_THROWS_AS(db_search_composite(db, {{"salary", "1"}}), SearchError);
    }

    TEST_CASE("random composite searches match the scan")
    {
        std::mt19937 rng(8);
        DbState db(db_fields());
        for (RecordId id = 1; id <= 40; ++id)
            db = db_update(db, DbOp::Insert, random_record(rng, id)).state;
        for (int i = 0; i < 20; ++i) {
            const Fields key = random_key(rng);
            CHECK(db_search_composite(db, key).ids == db.scan(key));
        }
    }
}
