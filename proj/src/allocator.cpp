#include "msw/allocator.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "msw/error.hpp"

namespace msw {

std::string_view to_string(AllocPolicy p)
{
    switch (p) {
    case AllocPolicy::BestFit: return "best-fit";
    case AllocPolicy::Gang: return "gang";
    case AllocPolicy::Page: return "page";
    }
    return "?";
}

AllocPolicy policy_from_string(std::string_view s)
{
    if (s == "best-fit" || s == "best_fit" || s == "BEST_FIT")
        return AllocPolicy::BestFit;
    if (s == "gang" || s == "GANG")
        return AllocPolicy::Gang;
    if (s == "page" || s == "PAGE")
        return AllocPolicy::Page;
    throw ArgumentError("unknown allocation policy '" + std::string(s) + "'");
}

std::pair<int, int> Placement::input(int i) const
{
    if (kind != Kind::Ganged)
        return {sw, i};
    for (const auto& s : segments)
        if (i >= s.first && i < s.first + s.count)
            return {s.sw, i - s.first};
    throw ArgumentError("input " + std::to_string(i) + " outside ganged join");
}

namespace {

enum class Use { Free, Exclusive, Paged, Gang };

struct Slot {
    Use use = Use::Free;
    std::vector<int> owners;  // demand indices
};

bool overlaps(const SwitchDemand& a, const SwitchDemand& b)
{
    return a.begin <= b.end && b.begin <= a.end;
}

class Allocator {
public:
    Allocator(const std::vector<SwitchDemand>& d, const MachineShape& shape, AllocPolicy policy)
        : shape_(shape), policy_(policy), bank_(shape.sizes.size())
    {
        table_.demands = d;
        table_.placements.resize(d.size());
    }

    AllocationTable run()
    {
        for (std::size_t i = 0; i < table_.demands.size(); ++i) {
            const auto& d = table_.demands[i];
            if (d.arity < 1 || d.fanout < 0)
                throw ArgumentError("demand '" + d.name + "' has arity < 1");
            if (best_fit(static_cast<int>(i)))
                continue;
            if (policy_ >= AllocPolicy::Gang && d.gangable && gang(static_cast<int>(i)))
                continue;
            if (policy_ >= AllocPolicy::Page && page(static_cast<int>(i)))
                continue;
            shortfall(d);
        }
        return std::move(table_);
    }

private:
    int size(int sw) const { return shape_.sizes[sw]; }

    // Smallest free switch that fits, lowest id on ties.
    bool best_fit(int di)
    {
        const int need = table_.demands[di].lines();
        int best = -1;
        for (int s = 0; s < static_cast<int>(bank_.size()); ++s)
            if (bank_[s].use == Use::Free && size(s) >= need && (best < 0 || size(s) < size(best)))
                best = s;
        if (best < 0)
            return false;
        bank_[best] = {Use::Exclusive, {di}};
        table_.placements[di] = {Placement::Kind::Exclusive, best, 0, {}};
        return true;
    }

    bool gang(int di)
    {
        const int n = table_.demands[di].arity;
        std::vector<int> free;
        for (int s = 0; s < static_cast<int>(bank_.size()); ++s)
            if (bank_[s].use == Use::Free)
                free.push_back(s);
        std::stable_sort(free.begin(), free.end(),
                         [&](int a, int b) { return size(a) > size(b); });
        std::vector<int> chain;
        std::vector<int> cap;
        int total = 0;
        for (int s : free) {
            if (total >= n)
                break;
            const int c = chain.empty() ? size(s) : size(s) - 1;
            if (c < 1)
                continue;
            chain.push_back(s);
            cap.push_back(c);
            total += c;
        }
        if (total < n || chain.size() < 2)
            return false;
        // Spread inputs evenly, one at a time to the least loaded segment.
        std::vector<int> count(chain.size(), 0);
        for (int k = 0; k < n; ++k) {
            int pick = -1;
            for (std::size_t j = 0; j < chain.size(); ++j)
                if (count[j] < cap[j] && (pick < 0 || count[j] < count[pick]))
                    pick = static_cast<int>(j);
            ++count[pick];
        }
        Placement p;
        p.kind = Placement::Kind::Ganged;
        int first = 0;
        for (std::size_t j = 0; j < chain.size(); ++j) {
            if (count[j] == 0)
                continue;
            GangSegment g;
            g.sw = chain[j];
            g.first = first;
            g.count = count[j];
            g.link = p.segments.empty() ? -1 : count[j];
            g.arity = count[j] + (g.link >= 0 ? 1 : 0);
            first += count[j];
            bank_[chain[j]] = {Use::Gang, {di}};
            p.segments.push_back(g);
        }
        p.sw = p.segments.back().sw;
        table_.placements[di] = std::move(p);
        return true;
    }

    // Share a switch whose occupants all live outside this demand's lifetime.
    bool page(int di)
    {
        const auto& d = table_.demands[di];
        int best = -1;
        for (int s = 0; s < static_cast<int>(bank_.size()); ++s) {
            const Slot& b = bank_[s];
            if (size(s) < d.lines() || (b.use != Use::Exclusive && b.use != Use::Paged))
                continue;
            const bool clash = std::any_of(b.owners.begin(), b.owners.end(), [&](int o) {
                return overlaps(table_.demands[o], d);
            });
            if (!clash && (best < 0 || size(s) < size(best)))
                best = s;
        }
        if (best < 0)
            return false;
        Slot& b = bank_[best];
        b.use = Use::Paged;
        b.owners.push_back(di);
        for (int o : b.owners)
            table_.placements[o] = {Placement::Kind::Paged, best, o + 1, {}};
        return true;
    }

    [[noreturn]] void shortfall(const SwitchDemand& d) const
    {
        int largest_free = 0;
        int free_lines = 0;
        for (int s = 0; s < static_cast<int>(bank_.size()); ++s)
            if (bank_[s].use == Use::Free) {
                largest_free = std::max(largest_free, size(s));
                free_lines += size(s);
            }
        std::ostringstream os;
        os << "cannot place '" << d.name << "' (" << d.lines() << " lines) under policy "
           << to_string(policy_) << ": largest free switch has " << largest_free << " lines, "
           << free_lines << " free lines in total; short by " << d.lines() - largest_free
           << " lines";
        throw CapacityError(os.str());
    }

    const MachineShape& shape_;
    AllocPolicy policy_;
    std::vector<Slot> bank_;
    AllocationTable table_;
};

}  // namespace

AllocationTable allocate(const std::vector<SwitchDemand>& demands, const MachineShape& shape,
                         AllocPolicy policy)
{
    shape.validate();
    return Allocator(demands, shape, policy).run();
}

bool AllocationTable::consistent(const MachineShape& shape) const
{
    const int n = shape.switch_count();
    std::vector<std::vector<int>> owners(n);
    std::vector<std::vector<int>> exclusive(n);
    for (std::size_t i = 0; i < placements.size(); ++i) {
        const auto& p = placements[i];
        const auto& d = demands[i];
        if (p.kind == Placement::Kind::Ganged) {
            int served = 0;
            for (const auto& g : p.segments) {
                if (g.sw < 0 || g.sw >= n || g.arity > shape.sizes[g.sw])
                    return false;
                exclusive[g.sw].push_back(static_cast<int>(i));
                served += g.count;
            }
            if (served != d.arity)
                return false;
            continue;
        }
        if (p.sw < 0 || p.sw >= n || d.lines() > shape.sizes[p.sw])
            return false;
        if (p.kind == Placement::Kind::Exclusive)
            exclusive[p.sw].push_back(static_cast<int>(i));
        else
            owners[p.sw].push_back(static_cast<int>(i));
    }
    for (int s = 0; s < n; ++s) {
        if (exclusive[s].size() > 1 || (!exclusive[s].empty() && !owners[s].empty()))
            return false;
        for (std::size_t a = 0; a < owners[s].size(); ++a)
            for (std::size_t b = a + 1; b < owners[s].size(); ++b)
                if (overlaps(demands[owners[s][a]], demands[owners[s][b]]))
                    return false;
    }
    return true;
}

std::string AllocationTable::to_string() const
{
    std::ostringstream os;
    for (std::size_t i = 0; i < placements.size(); ++i) {
        const auto& d = demands[i];
        const auto& p = placements[i];
        os << d.name << " lines=" << d.lines() << " life=" << d.begin << ".." << d.end << " -> ";
        switch (p.kind) {
        case Placement::Kind::Exclusive: os << "switch " << p.sw; break;
        case Placement::Kind::Paged: os << "switch " << p.sw << " paged slot " << p.slot; break;
        case Placement::Kind::Ganged:
            os << "gang";
            for (const auto& g : p.segments)
                os << " [sw " << g.sw << " inputs " << g.first << ".." << g.first + g.count - 1
                   << (g.link >= 0 ? " +link" : "") << "]";
            break;
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace msw
