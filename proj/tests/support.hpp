#pragma once

// Shared fixtures for the unit and acceptance binaries.

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "msw/db.hpp"
#include "msw/net.hpp"

namespace msw::testing {

inline std::string read_corpus(const std::string& name)
{
    std::ifstream in(std::string(MSW_CORPUS_DIR) + "/" + name);
    if (!in)
        return {};
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Acyclic by construction: node i only hears from inputs and nodes before it.
inline NetSpec random_dag(std::mt19937& rng, int nodes, int inputs)
{
    NetSpec s;
    for (int i = 0; i < inputs; ++i)
        s.inputs.push_back("s" + std::to_string(i));
    for (int i = 0; i < nodes; ++i) {
        NetNode n;
        n.name = "n" + std::to_string(i);
        n.arity = 1 + static_cast<int>(rng() % 3);
        n.kind = rng() % 2 ? GateKind::And : GateKind::Or;
        for (int line = 0; line < n.arity; ++line) {
            const int fanin = rng() % 8 == 0 ? 0 : 1 + static_cast<int>(rng() % 4 == 0);
            for (int k = 0; k < fanin; ++k) {
                const int src = static_cast<int>(rng() % static_cast<unsigned>(inputs + i));
                const std::string from = src < inputs ? s.inputs[static_cast<std::size_t>(src)]
                                                      : s.nodes[static_cast<std::size_t>(src - inputs)].name;
                const NetLink l{from, n.name, line};
                if (std::find(s.links.begin(), s.links.end(), l) == s.links.end())
                    s.links.push_back(l);
            }
        }
        s.nodes.push_back(n);
    }
    if (!s.nodes.empty())
        s.outputs.push_back(s.nodes.back().name);
    return s;
}

inline std::set<std::string> stimulus_from_bits(const NetSpec& s, unsigned bits)
{
    std::set<std::string> out;
    for (std::size_t i = 0; i < s.inputs.size(); ++i)
        if ((bits >> i) & 1U)
            out.insert(s.inputs[i]);
    return out;
}

// A shape that always holds the net: one wide switch per node.
inline MachineShape net_shape(const NetSpec& s)
{
    return MachineShape::uniform(std::max<int>(1, static_cast<int>(s.nodes.size())), 64, 8);
}

inline const std::vector<std::string>& db_fields()
{
    static const std::vector<std::string> f{"dept", "city", "role"};
    return f;
}

inline std::string random_value(std::mt19937& rng, const std::string& field)
{
    static const std::vector<std::string> dept{"eng", "ops", "hr", "sales"};
    static const std::vector<std::string> city{"oslo", "rome", "lima"};
    static const std::vector<std::string> role{"dev", "lead", "ops", "qa", "pm"};
    const auto& pool = field == "dept" ? dept : field == "city" ? city : role;
    return pool[rng() % pool.size()];
}

inline DbRecord random_record(std::mt19937& rng, RecordId id)
{
    DbRecord r;
    r.id = id;
    for (const auto& f : db_fields())
        r.fields[f] = random_value(rng, f);
    return r;
}

inline Fields random_key(std::mt19937& rng)
{
    Fields k;
    const auto& f = db_fields();
    const std::size_t n = 1 + rng() % f.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& name = f[rng() % f.size()];
        k[name] = random_value(rng, name);
    }
    return k;
}

}  // namespace msw::testing
