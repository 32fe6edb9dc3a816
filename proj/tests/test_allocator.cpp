#include <doctest.h>

#include <random>

#include "msw/allocator.hpp"
#include "msw/error.hpp"
#include "msw/gate.hpp"

using namespace msw;

namespace {

SwitchDemand join(const std::string& name, int arity, int begin = 1, int end = 1)
{
    return {name, arity, 1, true, begin, end};
}

MachineShape shape_of(std::vector<int> sizes)
{
    MachineShape s;
    s.sizes = std::move(sizes);
    s.procs = 1;
    return s;
}

// Drives the chain for one input pattern and reports whether the last
// segment fired.
bool chain_fires(const std::vector<GangSegment>& segs, const std::vector<bool>& inputs)
{
    std::vector<MultiSwitch> sw;
    for (const auto& g : segs) {
        sw.emplace_back(std::max(g.arity, 2), g.arity, GateKind::And);
        sw.back().set_target(0, 1);
    }
    for (std::size_t j = 0; j < segs.size(); ++j)
        for (int k = 0; k < segs[j].count; ++k)
            if (inputs[static_cast<std::size_t>(segs[j].first + k)])
                sw[j].drive_input(k);
    for (std::size_t round = 0; round <= segs.size(); ++round)
        for (std::size_t j = 0; j < segs.size(); ++j)
            if (sw[j].step().fired()) {
                if (j + 1 == segs.size())
                    return true;
                sw[j + 1].drive_input(segs[j + 1].link);
            }
    return false;
}

std::vector<GangSegment> chain_for(const std::vector<int>& parts)
{
    std::vector<GangSegment> segs;
    int first = 0;
    for (std::size_t j = 0; j < parts.size(); ++j) {
        GangSegment g;
        g.sw = static_cast<int>(j);
        g.first = first;
        g.count = parts[j];
        g.link = j == 0 ? -1 : parts[j];
        g.arity = parts[j] + (j == 0 ? 0 : 1);
        first += parts[j];
        segs.push_back(g);
    }
    return segs;
}

std::vector<bool> bits(unsigned p, int n)
{
    std::vector<bool> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        v[static_cast<std::size_t>(i)] = (p >> i) & 1U;
    return v;
}

}  // namespace

TEST_SUITE("allocator")
{
    TEST_CASE("best fit picks the smallest switch that fits")
    {
        const auto t = allocate({{"ms1", 3, 1, false, 1, 1}}, shape_of({4, 10}), AllocPolicy::BestFit);
        REQUIRE(t.placements.size() == 1);
        CHECK(t.placements[0].kind == Placement::Kind::Exclusive);
        CHECK(t.placements[0].sw == 0);

        const auto u = allocate({{"a", 3, 1, false, 1, 1}}, shape_of({10, 4, 4}), AllocPolicy::BestFit);
        CHECK(u.placements[0].sw == 1);  // lowest id on ties
    }

    TEST_CASE("fan-out counts toward the lines needed")
    {
        const auto t = allocate({{"s", 1, 6, false, 1, 1}}, shape_of({4, 8}), AllocPolicy::BestFit);
        CHECK(t.placements[0].sw == 1);
    }

    TEST_CASE("paging shares one switch between disjoint lifetimes")
    {
        const std::vector<SwitchDemand> d{{"ms1", 3, 1, false, 1, 2}, {"ms2", 3, 1, false, 4, 4}};
        const auto t = allocate(d, shape_of({4}), AllocPolicy::Page);
        REQUIRE(t.placements.size() == 2);
        for (int i = 0; i < 2; ++i) {
            CHECK(t.placements[i].kind == Placement::Kind::Paged);
            CHECK(t.placements[i].sw == 0);
            CHECK(t.placements[i].slot == i + 1);
        }
        CHECK(t.consistent(shape_of({4})));
        CHECK_THROWS_AS(allocate(d, shape_of({4}), AllocPolicy::BestFit), CapacityError);
    }

    TEST_CASE("overlapping lifetimes cannot page")
    {
        const std::vector<SwitchDemand> d{{"ms1", 3, 1, false, 1, 3}, {"ms2", 3, 1, false, 2, 4}};
        CHECK_THROWS_AS(allocate(d, shape_of({4}), AllocPolicy::Page), CapacityError);
    }

    TEST_CASE("gang splits an oversize join evenly")
    {
        const auto t = allocate({join("ms1", 6)}, shape_of({4, 4}), AllocPolicy::Gang);
        const Placement& p = t.placements[0];
        REQUIRE(p.kind == Placement::Kind::Ganged);
        REQUIRE(p.segments.size() == 2);
        CHECK(p.segments[0].count == 3);
        CHECK(p.segments[0].arity == 3);
        CHECK(p.segments[0].link == -1);
        CHECK(p.segments[1].count == 3);
        CHECK(p.segments[1].arity == 4);
        CHECK(p.segments[1].link == 3);
        CHECK(p.sw == p.segments[1].sw);
        CHECK(p.input(0) == std::pair<int, int>{p.segments[0].sw, 0});
        CHECK(p.input(4) == std::pair<int, int>{p.segments[1].sw, 1});
        CHECK_THROWS_AS(p.input(6), ArgumentError);
        CHECK(t.consistent(shape_of({4, 4})));
    }

    TEST_CASE("gang needs a gangable demand and enough lines")
    {
        CHECK_THROWS_AS(allocate({{"s", 6, 1, false, 1, 1}}, shape_of({4, 4}), AllocPolicy::Gang),
                        CapacityError);
        CHECK_THROWS_AS(allocate({join("j", 8)}, shape_of({4, 4}), AllocPolicy::Gang),
                        CapacityError);
        CHECK_NOTHROW(allocate({join("j", 7)}, shape_of({4, 4}), AllocPolicy::Gang));
        CHECK_THROWS_AS(allocate({join("j", 6)}, shape_of({4, 4}), AllocPolicy::BestFit),
                        CapacityError);
    }

    TEST_CASE("shortfall message names the demand and the gap")
    {
        try {
            allocate({{"big", 6, 1, false, 1, 1}}, shape_of({4, 4}), AllocPolicy::BestFit);
            FAIL("expected CapacityError");
        } catch (const CapacityError& e) {
            const std::string w = e.what();
            CHECK(w.find("big") != std::string::npos);
            CHECK(w.find("short by 2") != std::string::npos);
        }
    }

    TEST_CASE("policy names")
    {
        CHECK(policy_from_string("best-fit") == AllocPolicy::BestFit);
        CHECK(policy_from_string("GANG") == AllocPolicy::Gang);
        CHECK(to_string(AllocPolicy::Page) == "page");
        CHECK_THROWS_AS(policy_from_string("greedy"), ArgumentError);
    }

    TEST_CASE("gang chain equals a single AND join for every split up to 8 inputs")
    {
        for (int n = 2; n <= 8; ++n) {
            // Compositions of n: bit k of mask set means a cut after input k.
            for (unsigned mask = 1; mask < (1U << (n - 1)); ++mask) {
                std::vector<int> parts;
                int run = 1;
                for (int k = 0; k < n - 1; ++k) {
                    if ((mask >> k) & 1U) {
                        parts.push_back(run);
                        run = 0;
                    }
                    ++run;
                }
                parts.push_back(run);
                const auto segs = chain_for(parts);
                for (unsigned p = 0; p < (1U << n); ++p) {
                    const auto v = bits(p, n);
                    REQUIRE(chain_fires(segs, v) == eval_gate(GateKind::And, v));
                }
            }
        }
    }

    TEST_CASE("allocator gangs compose correctly on random shapes")
    {
        std::mt19937 rng(5);
        int ganged = 0;
        for (int i = 0; i < 300; ++i) {
            std::vector<int> sizes;
            const int count = 2 + static_cast<int>(rng() % 3);
            for (int s = 0; s < count; ++s)
                sizes.push_back(2 + static_cast<int>(rng() % 4));
            const int n = 2 + static_cast<int>(rng() % 7);
            AllocationTable t;
            try {
                t = allocate({join("j", n)}, shape_of(sizes), AllocPolicy::Gang);
            } catch (const CapacityError&) {
                continue;
            }
            const Placement& p = t.placements[0];
            if (p.kind != Placement::Kind::Ganged)
                continue;
            ++ganged;
            REQUIRE(t.consistent(shape_of(sizes)));
            for (unsigned bitsp = 0; bitsp < (1U << n); ++bitsp) {
                const auto v = bits(bitsp, n);
                REQUIRE(chain_fires(p.segments, v) == eval_gate(GateKind::And, v));
            }
        }
        CHECK(ganged > 20);
    }

    TEST_CASE("successful allocations never double-assign a line")
    {
        std::mt19937 rng(17);
        int placed = 0;
        for (int i = 0; i < 2000; ++i) {
            std::vector<int> sizes;
            const int count = 1 + static_cast<int>(rng() % 5);
            for (int s = 0; s < count; ++s)
                sizes.push_back(2 + static_cast<int>(rng() % 9));
            std::vector<SwitchDemand> d;
            const int nd = 1 + static_cast<int>(rng() % 6);
            for (int k = 0; k < nd; ++k) {
                const int b = 1 + static_cast<int>(rng() % 10);
                d.push_back({"d" + std::to_string(k), 1 + static_cast<int>(rng() % 10),
                             static_cast<int>(rng() % 6), rng() % 2 == 0, b,
                             b + static_cast<int>(rng() % 4)});
            }
            const auto policy = static_cast<AllocPolicy>(rng() % 3);
            try {
                const auto t = allocate(d, shape_of(sizes), policy);
                ++placed;
                REQUIRE_MESSAGE(t.consistent(shape_of(sizes)), t.to_string());
            } catch (const CapacityError&) {
            }
        }
        CHECK(placed > 200);
    }

    TEST_CASE("consistency check rejects a double assignment")
    {
        AllocationTable t;
        t.demands = {{"a", 2, 1, false, 1, 1}, {"b", 2, 1, false, 5, 5}};
        t.placements = {{Placement::Kind::Exclusive, 0, 0, {}}, {Placement::Kind::Exclusive, 0, 0, {}}};
        CHECK_FALSE(t.consistent(shape_of({4})));
        t.placements[0].kind = Placement::Kind::Paged;
        t.placements[1].kind = Placement::Kind::Paged;
        CHECK(t.consistent(shape_of({4})));
        t.demands[1].begin = 1;
        CHECK_FALSE(t.consistent(shape_of({4})));
    }
}
