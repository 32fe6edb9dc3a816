#include "msw/db.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <json.hpp>

#include "msw/error.hpp"
#include "msw/lowering.hpp"

namespace msw {

namespace {

bool identifier(const std::string& s)
{
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
        return false;
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isalnum(c) || c == '_'; });
}

std::string quote(const std::string& s)
{
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\')
            out.push_back('\\');
        out.push_back(c);
    }
    return out + "\"";
}

const std::set<RecordId> kNone;

}  // namespace

DbState::DbState(std::vector<std::string> indexed) : indexed_(std::move(indexed))
{
    for (const auto& f : indexed_) {
        if (!identifier(f))
            throw SpecError("index field '" + f + "' is not an identifier");
        if (!indexes_.emplace(f, std::map<std::string, std::set<RecordId>>{}).second)
            throw SpecError("field '" + f + "' indexed twice");
    }
}

bool DbState::is_indexed(const std::string& field) const { return indexes_.count(field) != 0; }

std::string DbState::value(RecordId id, const std::string& field) const
{
    const auto& f = records_.at(id);
    auto it = f.find(field);
    return it == f.end() ? std::string() : it->second;
}

const std::set<RecordId>& DbState::matches(const std::string& field, const std::string& v) const
{
    const auto& idx = indexes_.at(field);
    auto it = idx.find(v);
    return it == idx.end() ? kNone : it->second;
}

bool DbState::index_insert(const std::string& field, RecordId id)
{
    if (!records_.count(id) || !is_indexed(field))
        return false;
    return indexes_[field][value(id, field)].insert(id).second;
}

bool DbState::index_erase(const std::string& field, RecordId id)
{
    if (!records_.count(id) || !is_indexed(field))
        return false;
    auto& idx = indexes_[field];
    auto it = idx.find(value(id, field));
    if (it == idx.end() || !it->second.erase(id))
        return false;
    if (it->second.empty())
        idx.erase(it);
    return true;
}

bool DbState::invariants_hold() const
{
    for (const auto& [field, idx] : indexes_) {
        std::map<RecordId, int> seen;
        for (const auto& [v, ids] : idx) {
            if (ids.empty())
                return false;
            for (RecordId id : ids) {
                if (!records_.count(id) || value(id, field) != v)
                    return false;
                ++seen[id];
            }
        }
        if (seen.size() != records_.size())
            return false;
        for (const auto& [id, n] : seen)
            if (n != 1)
                return false;
    }
    return true;
}

std::set<RecordId> DbState::scan(const Fields& key) const
{
    std::set<RecordId> out;
    for (const auto& [id, fields] : records_) {
        const bool all = std::all_of(key.begin(), key.end(), [&](const auto& kv) {
            auto it = fields.find(kv.first);
            return (it == fields.end() ? std::string() : it->second) == kv.second;
        });
        if (all)
            out.insert(id);
    }
    return out;
}

DbRecord parse_record(const std::string& line)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("record: ") + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_number_integer())
        throw SpecError("record needs an integer \"id\"");
    DbRecord r;
    r.id = j["id"].get<RecordId>();
    if (j.contains("fields")) {
        if (!j["fields"].is_object())
            throw SpecError("record \"fields\" must be an object");
        for (const auto& [k, v] : j["fields"].items())
            r.fields[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    return r;
}

std::vector<DbRecord> read_records(std::istream& in)
{
    std::vector<DbRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        out.push_back(parse_record(line));
    }
    return out;
}

DbUpdate db_update(const DbState& db, DbOp op, const DbRecord& record, const MachineShape& shape)
{
    const bool insert = op == DbOp::Insert;
    const bool present = db.records().count(record.id) != 0;
    if (insert && present)
        throw UpdateError("record " + std::to_string(record.id) + " already exists");
    if (!insert && !present)
        throw UpdateError("record " + std::to_string(record.id) + " does not exist");

    DbUpdate out{db, {}, {}};
    if (insert)
        out.state.put_record(record);
    if (!db.indexed().empty()) {
        std::ostringstream src;
        src << "declare mswitch ms1\nms1(";
        const char* verb = insert ? "idx-insert-" : "idx-delete-";
        for (std::size_t i = 0; i < db.indexed().size(); ++i)
            src << (i ? ", " : "") << verb << db.indexed()[i] << "[" << record.id << "]";
        src << ")\n";
        out.source = src.str();

        CompileOptions opts;
        opts.mode = LowerMode::MSwitch;
        opts.policy = AllocPolicy::Page;
        Machine m(compile(out.source, shape, opts).program, shape);
        DbState& work = out.state;
        bool failed = false;
        m.set_extern_handler([&](Machine&, std::string_view name, std::span<std::int64_t> args) {
            const std::string n(name);
            bool ok = false;
            if (args.size() == 1 && n.rfind("idx-insert-", 0) == 0)
                ok = work.index_insert(n.substr(11), args[0]);
            else if (args.size() == 1 && n.rfind("idx-delete-", 0) == 0)
                ok = work.index_erase(n.substr(11), args[0]);
            failed |= !ok;
            return ok;
        });
        RunResult r = m.run();
        if (!r.ok() || failed)
            throw UpdateError("index maintenance failed for record " + std::to_string(record.id) +
                              (r.diagnostic.empty() ? "" : ": " + r.diagnostic));
        out.metrics = std::move(r.metrics);
    }
    if (!insert)
        out.state.drop_record(record.id);
    return out;
}

DbSearch db_search_composite(const DbState& db, const Fields& key, const MachineShape& shape)
{
    if (key.empty())
        throw SearchError("empty key");
    for (const auto& [f, v] : key)
        if (!db.is_indexed(f))
            throw SearchError("field '" + f + "' is not indexed");

    const std::set<RecordId>* cand = nullptr;
    for (const auto& [f, v] : key) {
        const auto& m = db.matches(f, v);
        if (!m.empty() && (!cand || m.size() < cand->size()))
            cand = &m;
    }
    DbSearch out;
    if (!cand)
        return out;

    std::ostringstream src;
    for (RecordId c : *cand) {
        src << "if (";
        bool first = true;
        for (const auto& [f, v] : key) {
            src << (first ? "" : " and ") << "(idx-has-" << f << "(" << c << ", " << quote(v)
                << ") == 1)";
            first = false;
        }
        src << ") then found(" << c << ")\n";
    }
    out.source = src.str();

    CompileOptions opts;
    opts.mode = LowerMode::MSwitch;
    opts.policy = AllocPolicy::Page;
    Machine m(compile(out.source, shape, opts).program, shape);
    m.set_extern_handler([&](Machine& vm, std::string_view name, std::span<std::int64_t> args) {
        const std::string n(name);
        if (n == "found" && args.size() == 1) {
            out.ids.insert(args[0]);
            return true;
        }
        if (n.rfind("idx-has-", 0) == 0 && args.size() == 2) {
            const auto& strings = vm.program().strings;
            if (args[1] < 1 || static_cast<std::size_t>(args[1]) > strings.size())
                return false;
            return db.matches(n.substr(8), strings[static_cast<std::size_t>(args[1] - 1)])
                       .count(args[0]) != 0;
        }
        return false;
    });
    RunResult r = m.run();
    if (!r.ok())
        throw SearchError("search run failed: " + r.diagnostic);
    out.metrics = std::move(r.metrics);
    return out;
}

}  // namespace msw
