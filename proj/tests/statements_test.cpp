#include <doctest.h>

#include <fstream>
#include <sstream>

#include "d2o/statements.hpp"

using namespace d2o;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

TEST_CASE("parse: INSERT literal forms") {
    Statement s = parse_statement("INSERT INTO workloadTable VALUES (1, 'ab', 42)");
    CHECK(s.kind == StatementKind::Insert);
    CHECK(s.table == "workloadTable");
    REQUIRE(s.literals.size() == 3);
    CHECK(s.literals[0] == Value::of_int(1));
    CHECK(s.literals[1] == Value::of_string("ab"));
    CHECK(s.literals[2] == Value::of_int(42));
}

TEST_CASE("parse: MIGRATE spellings normalize to one node") {
    Statement a = parse_statement("MIGRATE SYSTEMTABLE NO_REPLICATE");
    CHECK(a.kind == StatementKind::MigrateSystemTable);
    CHECK(a.no_replicate);
    Statement b = parse_statement("MIGRATE SYSTEM TABLE");
    CHECK(b.kind == StatementKind::MigrateSystemTable);
    CHECK(!b.no_replicate);
    Statement c = parse_statement("MIGRATE TABLEMANAGER workloadTable;");
    CHECK(c.kind == StatementKind::MigrateTableManager);
    CHECK(c.table == "workloadTable");
    CHECK(parse_statement("MIGRATE TABLE MANAGER t").kind == StatementKind::MigrateTableManager);
}

TEST_CASE("parse: statements outside the grammar are unsupported") {
    CHECK_THROWS_AS(parse_statement("UPDATE t SET x=1"), UnsupportedStatement);
    CHECK_THROWS_AS(parse_statement("SELECT a, b FROM t"), UnsupportedStatement);
    CHECK_THROWS_AS(parse_statement("DELETE FROM t WHERE a > 1 AND b > 2"), UnsupportedStatement);
    CHECK_THROWS_AS(parse_statement("SELECT * FROM t WHERE a < 5"), UnsupportedStatement);
    CHECK_THROWS_AS(parse_statement(""), UnsupportedStatement);
}

TEST_CASE("parse: keywords are case-insensitive, identifiers are not") {
    Statement s = parse_statement("select * from Foo where Bar > 10");
    CHECK(s.kind == StatementKind::Select);
    CHECK(s.table == "Foo");
    CHECK(s.predicate->column == "Bar");
    CHECK(s.predicate->op == '>');
    CHECK(s.predicate->literal == 10);
}

TEST_CASE("parse: CREATE TABLE with IF NOT EXISTS and column types") {
    Statement s =
        parse_statement("CREATE TABLE IF NOT EXISTS workloadTable (id int, str_a varchar(40), "
                        "int_a BIGINT)");
    CHECK(s.kind == StatementKind::CreateTable);
    CHECK(s.if_not_exists);
    REQUIRE(s.schema.columns.size() == 3);
    CHECK(s.schema.columns[0].second.kind == ColumnKind::Int);
    CHECK(s.schema.columns[1].second.kind == ColumnKind::Varchar);
    CHECK(s.schema.columns[1].second.varchar_len == 40);
    CHECK(s.schema.columns[2].second.kind == ColumnKind::BigInt);
    CHECK_THROWS_AS(parse_statement("CREATE TABLE t (a int, a int)"), UnsupportedStatement);
    CHECK_THROWS_AS(parse_statement("CREATE TABLE t (a varchar(0))"), UnsupportedStatement);
}

TEST_CASE("parse/render round-trip") {
    const char* samples[] = {
        "CREATE TABLE IF NOT EXISTS workloadTable (id int, str_a varchar(40), int_a bigint)",
        "DROP TABLE IF EXISTS workloadTable",
        "INSERT INTO t VALUES (1, 'abc', 99)",
        "SELECT * FROM t WHERE int_a > 679153090560",
        "DELETE FROM t WHERE id = 4",
        "SET AUTOCOMMIT OFF",
        "COMMIT",
        "MIGRATE SYSTEMTABLE NO_REPLICATE",
        "MIGRATE TABLEMANAGER workloadTable",
        "SLEEP 5000",
    };
    for (const char* text : samples) {
        Statement parsed = parse_statement(text);
        Statement reparsed = parse_statement(render_statement(parsed));
        CHECK(reparsed == parsed);
    }
}

TEST_CASE("placeholders: loop counter values") {
    LoopState s{7, 1, 0};
    CHECK(expand_placeholders("VALUES (<loop-counter/>)", s) == "VALUES (7)");
    CHECK(expand_placeholders("<last-loop-counter/>", s) == "6");
    LoopState zero{0, 1, 0};
    CHECK_THROWS_AS(expand_placeholders("<last-loop-counter/>", zero), InvalidPlaceholder);
}

TEST_CASE("placeholders: expansion is deterministic in (seed, iteration, position)") {
    LoopState a{3, 555, 9};
    LoopState b{3, 555, 9};
    std::string ta = expand_placeholders("(<generated-string/>, <generated-long/>)", a);
    std::string tb = expand_placeholders("(<generated-string/>, <generated-long/>)", b);
    CHECK(ta == tb);
    CHECK(a.rng_stream_position == b.rng_stream_position);
    CHECK(a.rng_stream_position > 9);  // the stream advanced
    // a different position gives a different draw
    LoopState c{3, 555, 10};
    CHECK(expand_placeholders("<generated-long/>", c) != expand_placeholders("<generated-long/>", b));
}

TEST_CASE("placeholders: generated string is quoted lowercase, length 8..40") {
    LoopState s{1, 12345, 0};
    for (int i = 0; i < 200; ++i) {
        std::string out = expand_placeholders("<generated-string/>", s);
        REQUIRE(out.size() >= 10);  // quotes + at least 8 chars
        CHECK(out.front() == '\'');
        CHECK(out.back() == '\'');
        std::string word = out.substr(1, out.size() - 2);
        CHECK(word.size() >= 8);
        CHECK(word.size() <= 40);
        for (char c : word) CHECK((c >= 'a' && c <= 'z'));
    }
}

TEST_CASE("placeholders: generated long is a non-negative 63-bit integer") {
    LoopState s{1, 9, 0};
    for (int i = 0; i < 200; ++i) {
        int64_t v = std::stoll(expand_placeholders("<generated-long/>", s));
        CHECK(v >= 0);
    }
}

TEST_CASE("workload: the insert/select workload parses to the published shape") {
    Workload w = parse_workload(slurp(std::string(D2O_TEST_DATA_DIR) + "/workloads/short.workload"));
    REQUIRE(w.lines.size() == 6);
    CHECK(w.lines[0].kind == StatementKind::SetAutocommit);
    CHECK(w.lines[1].kind == StatementKind::Insert);
    CHECK(w.lines[2].kind == StatementKind::Select);
    CHECK(w.lines[3].kind == StatementKind::Delete);
    CHECK(w.lines[4].kind == StatementKind::Commit);
    CHECK(w.lines[5].kind == StatementKind::SetAutocommit);
}

TEST_CASE("workload: the create/drop workload parses to the published shape") {
    Workload w = parse_workload(slurp(std::string(D2O_TEST_DATA_DIR) + "/workloads/st.workload"));
    REQUIRE(w.lines.size() == 3);
    CHECK(w.lines[0].kind == StatementKind::CreateTable);
    CHECK(w.lines[1].kind == StatementKind::Sleep);
    CHECK(w.lines[1].sleep_ms == 5000);  // seconds by default
    CHECK(w.lines[2].kind == StatementKind::DropTable);
    // the unit is configurable
    Workload ms = parse_workload(slurp(std::string(D2O_TEST_DATA_DIR) + "/workloads/st.workload"), 1);
    CHECK(ms.lines[1].sleep_ms == 5);
}

TEST_CASE("workload: empty file is an error") {
    CHECK_THROWS_AS(parse_workload(""), WorkloadError);
    CHECK_THROWS_AS(parse_workload("# only a comment\n"), WorkloadError);
}

TEST_CASE("workload: parse errors carry line numbers") {
    try {
        parse_workload("SET AUTOCOMMIT OFF;\nUPDATE t SET x=1;\n");
        FAIL("expected WorkloadError");
    } catch (const WorkloadError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}
