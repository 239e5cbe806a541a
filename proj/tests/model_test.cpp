#include <doctest.h>

#include <random>

#include "d2o/model.hpp"
#include "d2o/statements.hpp"

using namespace d2o;

namespace {

TableSchema workload_schema() {
    return parse_schema_columns("workloadTable", "id int, str_a varchar(40), int_a bigint");
}

Statement insert_stmt(const std::string& table, std::vector<Value> vals) {
    Statement s;
    s.kind = StatementKind::Insert;
    s.table = table;
    s.literals = std::move(vals);
    return s;
}

}  // namespace

TEST_CASE("uri: published example parses into its components") {
    InstanceRef ref =
        parse_uri("jdbc:d2o:tcp://archive.cs.st-andrews.ac.uk/d2o:9090/db_files/24e9bj81ff3");
    CHECK(ref.hostname == "archive.cs.st-andrews.ac.uk");
    CHECK(ref.port == 9090);
    CHECK(ref.disk_path == "db_files");
    CHECK(ref.instance_name == "24e9bj81ff3");
}

TEST_CASE("uri: round-trips bit-exactly") {
    const std::string uri =
        "jdbc:d2o:tcp://archive.cs.st-andrews.ac.uk/d2o:9090/db_files/24e9bj81ff3";
    CHECK(render_uri(parse_uri(uri)) == uri);
    // and the plain form, without the extra segment
    const std::string plain = "jdbc:d2o:tcp://host:9090/db/name";
    CHECK(render_uri(parse_uri(plain)) == plain);
}

TEST_CASE("uri: ref round-trip over random refs") {
    std::mt19937_64 rng(42);
    auto word = [&rng](size_t len) {
        std::string s;
        for (size_t i = 0; i < len; ++i) s += char('a' + rng() % 26);
        return s;
    };
    for (int i = 0; i < 200; ++i) {
        InstanceRef ref;
        ref.hostname = word(3 + rng() % 10);
        ref.port = int(rng() % 65536);
        ref.disk_path = word(4);
        if (rng() % 2) ref.disk_path += "/" + word(3);
        ref.instance_name = word(8);
        if (rng() % 3 == 0) ref.service = word(3);
        CHECK(parse_uri(render_uri(ref)) == ref);
    }
}

TEST_CASE("uri: malformed inputs are rejected") {
    CHECK_THROWS_AS(parse_uri(""), MalformedUri);
    CHECK_THROWS_AS(parse_uri("jdbc:d2o:tcp://host:9090/path/"), MalformedUri);  // empty name
    CHECK_THROWS_AS(parse_uri("jdbc:d2o:tcp://host:port/path/x"), MalformedUri);
    CHECK_THROWS_AS(parse_uri("jdbc:h2:tcp://host:1/p/x"), MalformedUri);
    CHECK_THROWS_AS(parse_uri("jdbc:d2o:tcp://host:9090x"), MalformedUri);
    CHECK_THROWS_AS(parse_uri("jdbc:d2o:tcp://:9090/p/x"), MalformedUri);
    CHECK_THROWS_AS(parse_uri("jdbc:d2o:tcp://host:99999/p/x"), MalformedUri);
}

TEST_CASE("apply_write: insert into empty table") {
    TableStore store;
    store.schema = workload_schema();
    Statement ins = insert_stmt("workloadTable", {Value::of_int(1), Value::of_string("ab"),
                                                  Value::of_int(42)});
    CHECK(apply_write(store, ins) == 1);
    CHECK(store.rows.size() == 1);
}

TEST_CASE("apply_write: delete without a match is a no-op") {
    TableStore store;
    store.schema = workload_schema();
    apply_write(store, insert_stmt("workloadTable",
                                   {Value::of_int(1), Value::of_string("x"), Value::of_int(9)}));
    Statement del = parse_statement("DELETE FROM workloadTable WHERE id=5");
    CHECK(apply_write(store, del) == 0);
    CHECK(store.rows.size() == 1);
}

TEST_CASE("apply_write: duplicate rows are all removed and counted") {
    TableStore store;
    store.schema = workload_schema();
    for (int i = 0; i < 3; ++i) {
        apply_write(store, insert_stmt("workloadTable", {Value::of_int(7), Value::of_string("d"),
                                                         Value::of_int(1)}));
    }
    CHECK(apply_write(store, parse_statement("DELETE FROM workloadTable WHERE id=7")) == 3);
    CHECK(store.rows.empty());
}

TEST_CASE("apply_write: schema violations are rejected") {
    TableStore store;
    store.schema = workload_schema();
    // arity
    CHECK_THROWS_AS(apply_write(store, insert_stmt("workloadTable", {Value::of_int(1)})),
                    SchemaViolation);
    // varchar overflow is a hard error
    CHECK_THROWS_AS(
        apply_write(store, insert_stmt("workloadTable",
                                       {Value::of_int(1), Value::of_string(std::string(41, 'a')),
                                        Value::of_int(2)})),
        SchemaViolation);
    // int column does not take 64-bit values
    CHECK_THROWS_AS(
        apply_write(store, insert_stmt("workloadTable",
                                       {Value::of_int(int64_t(1) << 40),
                                        Value::of_string("x"), Value::of_int(2)})),
        SchemaViolation);
    // wrong table
    CHECK_THROWS_AS(apply_write(store, insert_stmt("other", {Value::of_int(1),
                                                             Value::of_string("x"),
                                                             Value::of_int(2)})),
                    SchemaViolation);
}

TEST_CASE("select filter matches a brute-force scan of seeded 63-bit rows") {
    // rows drawn from the workload generator; the constant is the published
    // predicate literal
    const int64_t kThreshold = 679153090560;
    TableStore store;
    store.schema = workload_schema();
    LoopState loop{1, 99, 0};
    for (int i = 1; i <= 500; ++i) {
        loop.iteration = i;
        std::string text = expand_placeholders(
            "INSERT INTO workloadTable VALUES (<loop-counter/>, <generated-string/>, "
            "<generated-long/>)",
            loop);
        apply_write(store, parse_statement(text));
    }
    Statement sel = parse_statement("SELECT * FROM workloadTable WHERE int_a > 679153090560");
    auto got = query_select(store, sel);

    std::vector<Row> expected;
    for (const Row& row : store.rows) {
        if (row[2].integer > kThreshold) expected.push_back(row);
    }
    CHECK(got == expected);
    CHECK(!got.empty());
    CHECK(got.size() <= store.rows.size());
}

TEST_CASE("replay_log: empty log yields empty store") {
    TableStore store = replay_log(workload_schema(), {});
    CHECK(store.rows.empty());
    CHECK(store.log.empty());
}

TEST_CASE("replay_log: 100 random statements equal direct application") {
    // oracle: apply each statement directly, in order
    std::mt19937_64 rng(7);
    TableStore direct;
    direct.schema = workload_schema();
    std::vector<LogEntry> log;
    uint64_t seq = 1;
    for (int i = 0; i < 100; ++i) {
        Statement s;
        if (rng() % 3 == 0 && !direct.rows.empty()) {
            s = parse_statement("DELETE FROM workloadTable WHERE id=" +
                                std::to_string(rng() % 40));
        } else {
            s = insert_stmt("workloadTable",
                            {Value::of_int(int64_t(rng() % 40)),
                             Value::of_string(std::string(8, char('a' + rng() % 26))),
                             Value::of_int(int64_t(rng() >> 1))});
        }
        apply_write(direct, s);
        log.push_back({seq++, render_statement(s)});
    }
    TableStore replayed = replay_log(workload_schema(), log);
    CHECK(replayed.same_rows(direct));
    // replaying twice is a pure function
    TableStore again = replay_log(workload_schema(), log);
    CHECK(again.same_rows(replayed));
    CHECK(again.log == replayed.log);
}

TEST_CASE("replay_log: a sequence gap is corrupt") {
    std::vector<LogEntry> log{{1, "INSERT INTO t VALUES (1)"}, {3, "INSERT INTO t VALUES (2)"}};
    TableSchema schema = parse_schema_columns("t", "a int");
    CHECK_THROWS_AS(replay_log(schema, log), CorruptLog);
}

TEST_CASE("log file format round-trips") {
    std::vector<LogEntry> log{{1, "INSERT INTO t VALUES (1, 'ab')"},
                              {2, "DELETE FROM t WHERE a = 1"}};
    CHECK(parse_log(serialize_log(log)) == log);
    CHECK(serialize_log(log) ==
          "1\tINSERT INTO t VALUES (1, 'ab')\n2\tDELETE FROM t WHERE a = 1\n");
}
