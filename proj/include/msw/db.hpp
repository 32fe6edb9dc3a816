#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "msw/shape.hpp"
#include "msw/vm.hpp"

namespace msw {

using RecordId = std::int64_t;
using Fields = std::map<std::string, std::string>;

struct DbRecord {
    RecordId id = 0;
    Fields fields;
};

// Records plus one value -> ids index per indexed field. A record without an
// indexed field is indexed under the empty string.
class DbState {
public:
    DbState() = default;
    // Field names must be identifiers ([A-Za-z_][A-Za-z0-9_]*); SpecError otherwise.
    explicit DbState(std::vector<std::string> indexed);

    const std::vector<std::string>& indexed() const noexcept { return indexed_; }
    const std::map<RecordId, Fields>& records() const noexcept { return records_; }
    const std::map<std::string, std::map<std::string, std::set<RecordId>>>& indexes() const noexcept
    {
        return indexes_;
    }
    bool is_indexed(const std::string& field) const;
    std::string value(RecordId id, const std::string& field) const;
    const std::set<RecordId>& matches(const std::string& field, const std::string& value) const;

    // Every record in every index exactly once; no dangling entries.
    bool invariants_hold() const;

    // Linear scan: ids whose fields equal every (field, value) in key.
    std::set<RecordId> scan(const Fields& key) const;

    // Host-side mutation used by the index-maintenance processes.
    void put_record(const DbRecord& r) { records_[r.id] = r.fields; }
    void drop_record(RecordId id) { records_.erase(id); }
    bool index_insert(const std::string& field, RecordId id);
    bool index_erase(const std::string& field, RecordId id);

    bool operator==(const DbState&) const = default;

private:
    std::vector<std::string> indexed_;
    std::map<RecordId, Fields> records_;
    std::map<std::string, std::map<std::string, std::set<RecordId>>> indexes_;
};

// One JSON object per line: {"id": 7, "fields": {"name": "ada", "dept": 3}}.
// Non-string field values are stored in their JSON text form.
std::vector<DbRecord> read_records(std::istream& in);
DbRecord parse_record(const std::string& json_line);

enum class DbOp { Insert, Delete };

struct DbUpdate {
    DbState state;
    RunMetrics metrics;
    std::string source;  // generated program text
};

// Runs one generated program whose single mswitch fans out one maintenance
// thread per index. UpdateError (database unchanged) on a duplicate insert id,
// a missing delete id or a failed run.
DbUpdate db_update(const DbState& db, DbOp op, const DbRecord& record,
                   const MachineShape& shape = MachineShape::default_shape());

struct DbSearch {
    std::set<RecordId> ids;
    RunMetrics metrics;
    std::string source;
};

// Candidates come from the smallest non-empty per-field match set; each is
// verified by one fused if over the key fields. SearchError on an unindexed or
// empty key.
DbSearch db_search_composite(const DbState& db, const Fields& key,
                             const MachineShape& shape = MachineShape::default_shape());

}  // namespace msw
