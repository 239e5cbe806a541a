#include "d2o/model.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "d2o/statements.hpp"

namespace d2o {

namespace {

const std::string kUriPrefix = "jdbc:d2o:tcp://";

int parse_port(const std::string& s) {
    if (s.empty()) throw MalformedUri("missing port");
    int port = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), port);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw MalformedUri("non-numeric port: " + s);
    if (port < 0 || port > 65535) throw MalformedUri("port out of range: " + s);
    return port;
}

}  // namespace

InstanceRef parse_uri(const std::string& text) {
    if (text.empty()) throw MalformedUri("empty URI");
    if (text.rfind(kUriPrefix, 0) != 0) throw MalformedUri("bad prefix: " + text);
    std::string rest = text.substr(kUriPrefix.size());

    // <hostname>[/<service>]:<port>/<disk_path...>/<instance_name>
    size_t colon = rest.find(':');
    if (colon == std::string::npos) throw MalformedUri("missing port separator");
    std::string host_part = rest.substr(0, colon);
    rest = rest.substr(colon + 1);

    InstanceRef ref;
    size_t slash = host_part.find('/');
    if (slash == std::string::npos) {
        ref.hostname = host_part;
    } else {
        ref.hostname = host_part.substr(0, slash);
        ref.service = host_part.substr(slash + 1);
        if (ref.service.find('/') != std::string::npos) throw MalformedUri("bad host segment");
    }
    if (ref.hostname.empty()) throw MalformedUri("missing hostname");

    size_t path_start = rest.find('/');
    if (path_start == std::string::npos) throw MalformedUri("missing path");
    ref.port = parse_port(rest.substr(0, path_start));
    std::string path = rest.substr(path_start + 1);

    size_t last = path.rfind('/');
    if (last == std::string::npos) throw MalformedUri("missing instance name segment");
    ref.disk_path = path.substr(0, last);
    ref.instance_name = path.substr(last + 1);
    if (ref.disk_path.empty()) throw MalformedUri("missing disk path");
    if (ref.instance_name.empty()) throw MalformedUri("missing instance name");
    return ref;
}

std::string render_uri(const InstanceRef& ref) {
    std::ostringstream out;
    out << kUriPrefix << ref.hostname;
    if (!ref.service.empty()) out << '/' << ref.service;
    out << ':' << ref.port << '/' << ref.disk_path << '/' << ref.instance_name;
    return out.str();
}

int TableSchema::column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].first == name) return int(i);
    }
    return -1;
}

void check_row(const TableSchema& schema, const Row& row) {
    if (row.size() != schema.columns.size()) {
        throw SchemaViolation("arity mismatch for table " + schema.table_name);
    }
    for (size_t i = 0; i < row.size(); ++i) {
        const ColumnType& type = schema.columns[i].second;
        const Value& v = row[i];
        switch (type.kind) {
            case ColumnKind::Int:
                if (v.kind != Value::IntLit || v.integer < INT32_MIN || v.integer > INT32_MAX) {
                    throw SchemaViolation("value does not fit int column " + schema.columns[i].first);
                }
                break;
            case ColumnKind::BigInt:
                if (v.kind != Value::IntLit) {
                    throw SchemaViolation("value is not an integer for bigint column " +
                                          schema.columns[i].first);
                }
                break;
            case ColumnKind::Varchar:
                if (v.kind != Value::StringLit) {
                    throw SchemaViolation("value is not a string for varchar column " +
                                          schema.columns[i].first);
                }
                if (int(v.text.size()) > type.varchar_len) {
                    throw SchemaViolation("varchar overflow in column " + schema.columns[i].first);
                }
                break;
        }
    }
}

void TableStore::append_log(const std::string& statement_text) {
    log.push_back({next_seq(), statement_text});
}

std::vector<Row> TableStore::sorted_rows() const {
    std::vector<Row> out = rows;
    std::sort(out.begin(), out.end());
    return out;
}

bool TableStore::same_rows(const TableStore& other) const {
    return sorted_rows() == other.sorted_rows();
}

std::string serialize_log(const std::vector<LogEntry>& log) {
    std::ostringstream out;
    for (const auto& e : log) out << e.seq << '\t' << e.statement << '\n';
    return out.str();
}

std::vector<LogEntry> parse_log(const std::string& text) {
    std::vector<LogEntry> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos) throw CorruptLog("log line without separator: " + line);
        out.push_back({std::stoull(line.substr(0, tab)), line.substr(tab + 1)});
    }
    return out;
}

int apply_write(TableStore& store, const Statement& stmt) {
    switch (stmt.kind) {
        case StatementKind::Insert: {
            if (stmt.table != store.schema.table_name) {
                throw SchemaViolation("statement targets " + stmt.table + ", store holds " +
                                      store.schema.table_name);
            }
            check_row(store.schema, stmt.literals);
            store.rows.push_back(stmt.literals);
            return 1;
        }
        case StatementKind::Delete: {
            if (stmt.table != store.schema.table_name) {
                throw SchemaViolation("statement targets " + stmt.table + ", store holds " +
                                      store.schema.table_name);
            }
            int removed = 0;
            auto keep = [&](const Row& row) {
                if (!stmt.predicate || stmt.predicate->matches(store.schema, row)) {
                    ++removed;
                    return false;
                }
                return true;
            };
            auto it = std::stable_partition(store.rows.begin(), store.rows.end(), keep);
            store.rows.erase(it, store.rows.end());
            return removed;
        }
        default:
            throw SchemaViolation("not a write statement");
    }
}

std::vector<Row> query_select(const TableStore& store, const Statement& stmt) {
    std::vector<Row> out;
    for (const Row& row : store.rows) {
        if (!stmt.predicate || stmt.predicate->matches(store.schema, row)) out.push_back(row);
    }
    return out;
}

TableStore replay_log(const TableSchema& schema, const std::vector<LogEntry>& log) {
    TableStore store;
    store.schema = schema;
    uint64_t expected = 1;
    for (const auto& entry : log) {
        if (entry.seq != expected) {
            throw CorruptLog("sequence gap: expected " + std::to_string(expected) + ", got " +
                             std::to_string(entry.seq));
        }
        ++expected;
        Statement stmt = parse_statement(entry.statement);
        apply_write(store, stmt);
        store.log.push_back(entry);
    }
    return store;
}

}  // namespace d2o
