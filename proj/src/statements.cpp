#include "d2o/statements.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace d2o {

namespace {

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
}

struct Tokenizer {
    explicit Tokenizer(const std::string& text) : text_(text) {}

    // Tokens: identifiers/keywords, integers, quoted strings, punctuation.
    std::string next() {
        skip_ws();
        if (pos_ >= text_.size()) return "";
        char c = text_[pos_];
        if (c == '\'') {
            size_t end = text_.find('\'', pos_ + 1);
            if (end == std::string::npos) throw UnsupportedStatement("unterminated string literal");
            std::string tok = text_.substr(pos_, end - pos_ + 1);
            pos_ = end + 1;
            return tok;
        }
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '<') {
            // placeholder tags like <generated-string/> come through as one token
            size_t start = pos_;
            if (c == '<') {
                size_t end = text_.find('>', pos_);
                if (end == std::string::npos) throw UnsupportedStatement("unterminated tag");
                pos_ = end + 1;
                return text_.substr(start, pos_ - start);
            }
            while (pos_ < text_.size()) {
                char d = text_[pos_];
                if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '-') {
                    ++pos_;
                } else {
                    break;
                }
            }
            return text_.substr(start, pos_ - start);
        }
        ++pos_;
        return std::string(1, c);
    }

    std::string peek() {
        size_t saved = pos_;
        std::string tok = next();
        pos_ = saved;
        return tok;
    }

    void expect(const std::string& tok) {
        std::string got = next();
        if (upper(got) != upper(tok)) {
            throw UnsupportedStatement("expected '" + tok + "', got '" + got + "'");
        }
    }

    bool done() {
        skip_ws();
        return pos_ >= text_.size();
    }

  private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    const std::string& text_;
    size_t pos_ = 0;
};

int64_t parse_int_token(const std::string& tok) {
    int64_t v = 0;
    const char* begin = tok.data();
    const char* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) throw UnsupportedStatement("expected integer, got '" + tok + "'");
    return v;
}

Value parse_literal(const std::string& tok) {
    if (tok.size() >= 2 && tok.front() == '\'' && tok.back() == '\'') {
        return Value::of_string(tok.substr(1, tok.size() - 2));
    }
    return Value::of_int(parse_int_token(tok));
}

ColumnType parse_column_type(Tokenizer& tz, const std::string& type_tok) {
    std::string t = upper(type_tok);
    if (t == "INT") return {ColumnKind::Int, 0};
    if (t == "BIGINT") return {ColumnKind::BigInt, 0};
    if (t == "VARCHAR") {
        tz.expect("(");
        int64_t k = parse_int_token(tz.next());
        tz.expect(")");
        if (k < 1) throw UnsupportedStatement("varchar length must be >= 1");
        return {ColumnKind::Varchar, int(k)};
    }
    throw UnsupportedStatement("unknown column type '" + type_tok + "'");
}

std::optional<Predicate> parse_where(Tokenizer& tz) {
    if (tz.done()) return std::nullopt;
    std::string tok = tz.next();
    if (upper(tok) != "WHERE") throw UnsupportedStatement("unexpected token '" + tok + "'");
    Predicate p;
    p.column = tz.next();
    std::string op = tz.next();
    if (op != ">" && op != "=") throw UnsupportedStatement("unsupported predicate operator '" + op + "'");
    p.op = op[0];
    p.literal = parse_int_token(tz.next());
    if (!tz.done()) throw UnsupportedStatement("trailing tokens after predicate");
    return p;
}

// splitmix64; fixed algorithm so expansion is identical everywhere
uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

uint64_t placeholder_draw(LoopState& state) {
    uint64_t v = splitmix64(state.rng_seed + 0x632BE59BD9B4E019ULL * (state.rng_stream_position + 1));
    ++state.rng_stream_position;
    return v;
}

}  // namespace

bool Predicate::matches(const TableSchema& schema, const Row& row) const {
    int idx = schema.column_index(column);
    if (idx < 0) throw SchemaViolation("unknown column " + column + " in predicate");
    const Value& v = row[size_t(idx)];
    if (v.kind != Value::IntLit) return false;
    return op == '>' ? v.integer > literal : v.integer == literal;
}

TableSchema parse_schema_columns(const std::string& table, const std::string& column_list) {
    TableSchema schema;
    schema.table_name = table;
    Tokenizer tz(column_list);
    while (!tz.done()) {
        std::string name = tz.next();
        if (name == ",") continue;
        std::string type_tok = tz.next();
        ColumnType type = parse_column_type(tz, type_tok);
        for (const auto& [existing, _] : schema.columns) {
            if (existing == name) throw UnsupportedStatement("duplicate column name " + name);
        }
        schema.columns.emplace_back(name, type);
    }
    if (schema.columns.empty()) throw UnsupportedStatement("empty column list");
    return schema;
}

Statement parse_statement(const std::string& text) {
    std::string body = text;
    while (!body.empty() && (body.back() == ';' || std::isspace(static_cast<unsigned char>(body.back())))) {
        body.pop_back();
    }
    if (body.empty()) throw UnsupportedStatement("empty statement");

    Tokenizer tz(body);
    std::string first = upper(tz.next());
    Statement s;

    if (first == "CREATE") {
        tz.expect("TABLE");
        s.kind = StatementKind::CreateTable;
        std::string tok = tz.next();
        if (upper(tok) == "IF") {
            tz.expect("NOT");
            tz.expect("EXISTS");
            s.if_not_exists = true;
            tok = tz.next();
        }
        std::string table = tok;
        tz.expect("(");
        // capture the raw column list up to the matching close paren
        std::string cols;
        int depth = 1;
        while (depth > 0) {
            std::string t = tz.next();
            if (t.empty()) throw UnsupportedStatement("unterminated column list");
            if (t == "(") ++depth;
            if (t == ")") {
                --depth;
                if (depth == 0) break;
            }
            cols += t + " ";
        }
        if (!tz.done()) throw UnsupportedStatement("trailing tokens after column list");
        s.schema = parse_schema_columns(table, cols);
        s.table = table;
        return s;
    }
    if (first == "DROP") {
        tz.expect("TABLE");
        s.kind = StatementKind::DropTable;
        std::string tok = tz.next();
        if (upper(tok) == "IF") {
            tz.expect("EXISTS");
            s.if_exists = true;
            tok = tz.next();
        }
        s.table = tok;
        if (!tz.done()) throw UnsupportedStatement("trailing tokens after DROP TABLE");
        return s;
    }
    if (first == "INSERT") {
        tz.expect("INTO");
        s.kind = StatementKind::Insert;
        s.table = tz.next();
        tz.expect("VALUES");
        tz.expect("(");
        while (true) {
            std::string tok = tz.next();
            if (tok == ")") break;
            if (tok == ",") continue;
            if (tok.empty()) throw UnsupportedStatement("unterminated VALUES list");
            s.literals.push_back(parse_literal(tok));
        }
        if (!tz.done()) throw UnsupportedStatement("trailing tokens after VALUES");
        if (s.literals.empty()) throw UnsupportedStatement("empty VALUES list");
        return s;
    }
    if (first == "SELECT") {
        tz.expect("*");
        tz.expect("FROM");
        s.kind = StatementKind::Select;
        s.table = tz.next();
        s.predicate = parse_where(tz);
        return s;
    }
    if (first == "DELETE") {
        tz.expect("FROM");
        s.kind = StatementKind::Delete;
        s.table = tz.next();
        s.predicate = parse_where(tz);
        return s;
    }
    if (first == "SET") {
        tz.expect("AUTOCOMMIT");
        s.kind = StatementKind::SetAutocommit;
        std::string mode = upper(tz.next());
        if (mode == "ON") {
            s.autocommit_on = true;
        } else if (mode == "OFF") {
            s.autocommit_on = false;
        } else {
            throw UnsupportedStatement("SET AUTOCOMMIT expects ON or OFF");
        }
        return s;
    }
    if (first == "COMMIT") {
        if (!tz.done()) throw UnsupportedStatement("trailing tokens after COMMIT");
        s.kind = StatementKind::Commit;
        return s;
    }
    if (first == "MIGRATE") {
        std::string what = upper(tz.next());
        if (what == "SYSTEM") what += upper(tz.next());  // MIGRATE SYSTEM TABLE
        if (what == "SYSTEMTABLE") {
            s.kind = StatementKind::MigrateSystemTable;
            if (!tz.done()) {
                std::string flag = upper(tz.next());
                if (flag != "NO_REPLICATE") throw UnsupportedStatement("unknown migrate flag " + flag);
                s.no_replicate = true;
            }
            return s;
        }
        if (what == "TABLE") what += upper(tz.next());  // MIGRATE TABLE MANAGER
        if (what == "TABLEMANAGER") {
            s.kind = StatementKind::MigrateTableManager;
            s.table = tz.next();
            if (s.table.empty()) throw UnsupportedStatement("MIGRATE TABLEMANAGER needs a table");
            if (!tz.done()) throw UnsupportedStatement("trailing tokens after MIGRATE TABLEMANAGER");
            return s;
        }
        throw UnsupportedStatement("unknown MIGRATE target " + what);
    }
    if (first == "SLEEP") {
        s.kind = StatementKind::Sleep;
        s.sleep_ms = parse_int_token(tz.next());
        if (!tz.done()) throw UnsupportedStatement("trailing tokens after SLEEP");
        return s;
    }
    throw UnsupportedStatement("unsupported statement: " + text);
}

std::string render_statement(const Statement& s) {
    std::ostringstream out;
    auto render_type = [](const ColumnType& t) -> std::string {
        switch (t.kind) {
            case ColumnKind::Int: return "int";
            case ColumnKind::BigInt: return "bigint";
            case ColumnKind::Varchar: return "varchar(" + std::to_string(t.varchar_len) + ")";
        }
        return "";
    };
    auto render_value = [](const Value& v) -> std::string {
        if (v.kind == Value::IntLit) return std::to_string(v.integer);
        return "'" + v.text + "'";
    };
    switch (s.kind) {
        case StatementKind::CreateTable: {
            out << "CREATE TABLE ";
            if (s.if_not_exists) out << "IF NOT EXISTS ";
            out << s.schema.table_name << " (";
            for (size_t i = 0; i < s.schema.columns.size(); ++i) {
                if (i) out << ", ";
                out << s.schema.columns[i].first << " " << render_type(s.schema.columns[i].second);
            }
            out << ")";
            break;
        }
        case StatementKind::DropTable:
            out << "DROP TABLE ";
            if (s.if_exists) out << "IF EXISTS ";
            out << s.table;
            break;
        case StatementKind::Insert: {
            out << "INSERT INTO " << s.table << " VALUES (";
            for (size_t i = 0; i < s.literals.size(); ++i) {
                if (i) out << ", ";
                out << render_value(s.literals[i]);
            }
            out << ")";
            break;
        }
        case StatementKind::Select:
            out << "SELECT * FROM " << s.table;
            if (s.predicate) out << " WHERE " << s.predicate->column << " " << s.predicate->op << " "
                                 << s.predicate->literal;
            break;
        case StatementKind::Delete:
            out << "DELETE FROM " << s.table;
            if (s.predicate) out << " WHERE " << s.predicate->column << " " << s.predicate->op << " "
                                 << s.predicate->literal;
            break;
        case StatementKind::SetAutocommit:
            out << "SET AUTOCOMMIT " << (s.autocommit_on ? "ON" : "OFF");
            break;
        case StatementKind::Commit:
            out << "COMMIT";
            break;
        case StatementKind::MigrateSystemTable:
            out << "MIGRATE SYSTEMTABLE";
            if (s.no_replicate) out << " NO_REPLICATE";
            break;
        case StatementKind::MigrateTableManager:
            out << "MIGRATE TABLEMANAGER " << s.table;
            break;
        case StatementKind::Sleep:
            out << "SLEEP " << s.sleep_ms;
            break;
    }
    return out.str();
}

std::string expand_placeholders(const std::string& tmpl, LoopState& state) {
    std::string out;
    size_t pos = 0;
    while (pos < tmpl.size()) {
        size_t open = tmpl.find('<', pos);
        if (open == std::string::npos) {
            out += tmpl.substr(pos);
            break;
        }
        size_t close = tmpl.find("/>", open);
        if (close == std::string::npos) {
            out += tmpl.substr(pos);
            break;
        }
        std::string tag = tmpl.substr(open, close - open + 2);
        if (tag == "<loop-counter/>") {
            out += tmpl.substr(pos, open - pos);
            out += std::to_string(state.iteration);
        } else if (tag == "<last-loop-counter/>") {
            if (state.iteration < 1) {
                throw InvalidPlaceholder("<last-loop-counter/> used at iteration 0");
            }
            out += tmpl.substr(pos, open - pos);
            out += std::to_string(state.iteration - 1);
        } else if (tag == "<generated-string/>") {
            out += tmpl.substr(pos, open - pos);
            size_t len = 8 + placeholder_draw(state) % 33;  // uniform in [8, 40]
            std::string word;
            for (size_t i = 0; i < len; ++i) word += char('a' + placeholder_draw(state) % 26);
            out += "'" + word + "'";
        } else if (tag == "<generated-long/>") {
            out += tmpl.substr(pos, open - pos);
            out += std::to_string(int64_t(placeholder_draw(state) >> 1));  // non-negative 63-bit
        } else {
            // not a placeholder (e.g. a '<' inside a string); copy through
            out += tmpl.substr(pos, close + 2 - pos);
        }
        pos = close + 2;
    }
    return out;
}

Workload parse_workload(const std::string& text, int64_t sleep_unit_ms) {
    Workload w;
    std::istringstream in(text);
    std::string line;
    std::string pending;
    int line_no = 0;
    int pending_start = 0;

    auto needs_continuation = [](const std::string& s) {
        int depth = 0;
        bool in_string = false;
        for (char c : s) {
            if (c == '\'') in_string = !in_string;
            if (in_string) continue;
            if (c == '(') ++depth;
            if (c == ')') --depth;
        }
        if (in_string || depth > 0) return true;
        size_t last = s.find_last_not_of(" \t\r");
        return last != std::string::npos && s[last] == ',';
    };

    auto flush = [&](const std::string& stmt_text, int at_line) {
        // Validate shape with a probe expansion; keep the raw template.
        LoopState probe{1, 0, 0};
        Statement parsed;
        try {
            parsed = parse_statement(expand_placeholders(stmt_text, probe));
        } catch (const std::exception& e) {
            throw WorkloadError("line " + std::to_string(at_line) + ": " + e.what());
        }
        WorkloadLine wl;
        wl.template_text = stmt_text;
        wl.kind = parsed.kind;
        w.lines.push_back(wl);
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        size_t first = trimmed.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        trimmed = trimmed.substr(first);
        if (trimmed[0] == '#') continue;

        // <sleep>k</sleep> lines pause the loop body
        if (trimmed.rfind("<sleep>", 0) == 0) {
            size_t end = trimmed.find("</sleep>");
            if (end == std::string::npos) throw WorkloadError("line " + std::to_string(line_no) + ": unterminated <sleep>");
            int64_t k = std::stoll(trimmed.substr(7, end - 7));
            WorkloadLine wl;
            wl.template_text = trimmed;
            wl.kind = StatementKind::Sleep;
            wl.sleep_ms = k * sleep_unit_ms;
            w.lines.push_back(wl);
            continue;
        }

        if (pending.empty()) {
            pending = trimmed;
            pending_start = line_no;
        } else {
            pending += " " + trimmed;
        }
        if (needs_continuation(pending)) continue;
        flush(pending, pending_start);
        pending.clear();
    }
    if (!pending.empty()) flush(pending, pending_start);
    if (w.lines.empty()) throw WorkloadError("empty workload");
    return w;
}

}  // namespace d2o
