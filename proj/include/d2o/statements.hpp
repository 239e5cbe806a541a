#pragma once

// Parser for the mini statement language used by workloads and scripts.
// This is the only query surface; full SQL is out of scope.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "d2o/model.hpp"

namespace d2o {

struct UnsupportedStatement : std::runtime_error {
    explicit UnsupportedStatement(const std::string& what) : std::runtime_error(what) {}
};
struct InvalidPlaceholder : std::runtime_error {
    explicit InvalidPlaceholder(const std::string& what) : std::runtime_error(what) {}
};
struct WorkloadError : std::runtime_error {
    explicit WorkloadError(const std::string& what) : std::runtime_error(what) {}
};

enum class StatementKind {
    CreateTable,
    DropTable,
    Insert,
    Select,
    Delete,
    SetAutocommit,
    Commit,
    MigrateSystemTable,
    MigrateTableManager,
    Sleep,
};

// The only predicate forms in the workloads: `<col> > <int>` and `<col> = <int>`.
struct Predicate {
    std::string column;
    char op = '=';  // '=' or '>'
    int64_t literal = 0;

    bool matches(const TableSchema& schema, const Row& row) const;
    bool operator==(const Predicate&) const = default;
};

struct Statement {
    StatementKind kind = StatementKind::Commit;
    std::string table;
    TableSchema schema;                  // CreateTable
    bool if_not_exists = false;          // CreateTable
    bool if_exists = false;              // DropTable
    std::vector<Value> literals;         // Insert
    std::optional<Predicate> predicate;  // Select / Delete
    bool autocommit_on = false;          // SetAutocommit
    bool no_replicate = false;           // MigrateSystemTable
    int64_t sleep_ms = 0;                // Sleep

    bool is_write() const { return kind == StatementKind::Insert || kind == StatementKind::Delete; }
    bool operator==(const Statement&) const = default;
};

// Keywords are case-insensitive, identifiers case-sensitive, whitespace free.
// Anything outside the supported forms raises UnsupportedStatement.
Statement parse_statement(const std::string& text);
std::string render_statement(const Statement& s);

TableSchema parse_schema_columns(const std::string& table, const std::string& column_list);

// --- workload templates -----------------------------------------------------

// Seeded placeholder expansion state. Equal (seed, iteration, position)
// always produce identical output.
struct LoopState {
    int64_t iteration = 0;
    uint64_t rng_seed = 0;
    uint64_t rng_stream_position = 0;
};

// Expands <loop-counter/>, <last-loop-counter/>, <generated-string/> and
// <generated-long/>, advancing the stream position deterministically.
std::string expand_placeholders(const std::string& tmpl, LoopState& state);

struct WorkloadLine {
    std::string template_text;  // raw, placeholders intact
    StatementKind kind;
    int64_t sleep_ms = 0;  // Sleep lines
};

// One ordered loop body, executed repeatedly by a workload runner.
struct Workload {
    std::vector<WorkloadLine> lines;
};

// `sleep_unit_ms` is the multiplier applied to `<sleep>k</sleep>` values; the
// source material never states the unit, so it defaults to seconds.
Workload parse_workload(const std::string& text, int64_t sleep_unit_ms = 1000);

}  // namespace d2o
