#pragma once

// Domain types for instances, tables, rows and the local persisted store.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace d2o {

struct MalformedUri : std::runtime_error {
    explicit MalformedUri(const std::string& what) : std::runtime_error(what) {}
};
struct SchemaViolation : std::runtime_error {
    explicit SchemaViolation(const std::string& what) : std::runtime_error(what) {}
};
struct CorruptLog : std::runtime_error {
    explicit CorruptLog(const std::string& what) : std::runtime_error(what) {}
};

// Identity of a database instance. The instance name is unique in the
// database system and never changes; the address may.
struct InstanceRef {
    std::string instance_name;
    std::string hostname;
    int port = 0;
    std::string disk_path;
    // Optional path segment between hostname and port (the published URI
    // format allows one, e.g. ".../d2o:9090/...").
    std::string service;

    bool operator==(const InstanceRef&) const = default;
    auto operator<=>(const InstanceRef&) const = default;
};

InstanceRef parse_uri(const std::string& text);
std::string render_uri(const InstanceRef& ref);

enum class ColumnKind { Int, BigInt, Varchar };

struct ColumnType {
    ColumnKind kind = ColumnKind::Int;
    int varchar_len = 0;  // k for varchar(k)

    bool operator==(const ColumnType&) const = default;
};

struct TableSchema {
    std::string table_name;
    std::vector<std::pair<std::string, ColumnType>> columns;

    bool operator==(const TableSchema&) const = default;
    int column_index(const std::string& name) const;  // -1 when absent
};

// A typed literal. Integer literals carry their value; whether they fit a
// column is checked when a row is admitted.
struct Value {
    enum Kind { IntLit, StringLit } kind = IntLit;
    int64_t integer = 0;
    std::string text;

    static Value of_int(int64_t v) { return Value{IntLit, v, {}}; }
    static Value of_string(std::string s) { return Value{StringLit, 0, std::move(s)}; }
    bool operator==(const Value&) const = default;
    auto operator<=>(const Value&) const = default;
};

using Row = std::vector<Value>;

struct LogEntry {
    uint64_t seq = 0;
    std::string statement;

    bool operator==(const LogEntry&) const = default;
};

// Rows are a multiset; the log is authoritative (replaying it from empty
// yields exactly the current rows).
struct TableStore {
    TableSchema schema;
    std::vector<Row> rows;
    std::vector<LogEntry> log;

    uint64_t next_seq() const { return log.empty() ? 1 : log.back().seq + 1; }
    void append_log(const std::string& statement_text);
    std::vector<Row> sorted_rows() const;
    bool same_rows(const TableStore& other) const;
};

// n: table replicas, t: Table Manager state replicas, s: System Table state
// replicas, r: replicas required to commit (partial mode).
struct ReplicationConfig {
    int n = 1;
    int t = 1;
    int s = 1;
    int r = 1;
};

void check_row(const TableSchema& schema, const Row& row);

// Log file format: one entry per line, `<seq>\t<statement>`.
std::string serialize_log(const std::vector<LogEntry>& log);
std::vector<LogEntry> parse_log(const std::string& text);

struct Statement;  // statements.hpp

// Executes one write statement; INSERT returns 1, DELETE returns the number
// of removed rows. Does not touch the log — the caller records committed
// writes.
int apply_write(TableStore& store, const Statement& stmt);

// Rows matching the statement's predicate (SELECT path).
std::vector<Row> query_select(const TableStore& store, const Statement& stmt);

TableStore replay_log(const TableSchema& schema, const std::vector<LogEntry>& log);

}  // namespace d2o
