#include <cadloop/error.hpp>
#include <cadloop/geom.hpp>
#include <cadloop/util.hpp>

#include <doctest.h>

#include "test_support.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

using namespace cadloop;
using testsupport::ScratchDir;
using testsupport::error_code_of;

TEST_SUITE_BEGIN("util");

TEST_CASE("fnv1a64 matches the published reference vectors") {
    CHECK(fnv1a64(std::string{}) == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64(std::string{"a"}) == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64(std::string{"foobar"}) == 0x85944171f73967e8ULL);
    const std::vector<uint8_t> bytes{'a'};
    CHECK(fnv1a64(bytes.data(), bytes.size()) == fnv1a64(std::string{"a"}));
}

TEST_CASE("to_hex is 16 zero-padded lowercase digits") {
    CHECK(to_hex(0) == "0000000000000000");
    CHECK(to_hex(0xdeadbeefULL) == "00000000deadbeef");
    CHECK(to_hex(0xffffffffffffffffULL) == "ffffffffffffffff");
}

TEST_CASE("base64 round trip and RFC 4648 vectors") {
    const auto enc = [](const std::string& s) {
        return base64_encode(std::vector<uint8_t>(s.begin(), s.end()));
    };
    CHECK(enc("") == "");
    CHECK(enc("f") == "Zg==");
    CHECK(enc("fo") == "Zm8=");
    CHECK(enc("foo") == "Zm9v");
    CHECK(enc("foobar") == "Zm9vYmFy");

    std::vector<uint8_t> blob;
    for (int i = 0; i < 257; ++i) blob.push_back(uint8_t(i * 31));
    CHECK(base64_decode(base64_encode(blob)) == blob);

    CHECK(error_code_of([] { base64_decode("Zg=!"); }) == ErrorCode::corrupt_payload);
}

TEST_CASE("text and binary file round trips create parent directories") {
    ScratchDir dir;
    const auto path = dir.file("a/b/c.txt");
    write_text_file(path, "hello\n");
    CHECK(read_text_file(path) == "hello\n");

    const std::vector<uint8_t> payload{0, 1, 2, 255, 128};
    const auto bin = dir.file("deep/nested/data.bin");
    write_binary_file(bin, payload);
    CHECK(read_binary_file(bin) == payload);

    CHECK(error_code_of([&] { read_text_file(dir.file("missing.txt")); }) ==
          ErrorCode::file_not_found);
    CHECK(error_code_of([&] { read_binary_file(dir.file("missing.bin")); }) ==
          ErrorCode::file_not_found);
}

TEST_CASE("KeyValueConfig parses sections, comments, and typed getters") {
    ScratchDir dir;
    const auto path = dir.file("run.cfg");
    write_text_file(path,
                    "# comment line\n"
                    "corpus.count = 12\n"
                    "loop.stop_threshold=0.25\n"
                    "\n"
                    "scan.enabled = yes\n"
                    "run.label = beam sweep\n");
    KeyValueConfig cfg;
    cfg.load_file(path);
    CHECK(cfg.get_int("corpus.count", -1) == 12);
    CHECK(cfg.get_double("loop.stop_threshold", -1.0) == doctest::Approx(0.25));
    CHECK(cfg.get_bool("scan.enabled", false));
    CHECK(cfg.get("run.label", "") == "beam sweep");
    CHECK(cfg.get("absent.key", "fallback") == "fallback");
    CHECK(cfg.get_int("absent.key", 7) == 7);
    CHECK_FALSE(cfg.has("absent.key"));
}

TEST_CASE("KeyValueConfig: later assignments win and serialization is sorted") {
    KeyValueConfig cfg;
    cfg.set("b.key", "1");
    cfg.set("a.key", "2");
    cfg.set("b.key", "3");
    CHECK(cfg.get("b.key", "") == "3");
    CHECK(cfg.serialize() == "a.key=2\nb.key=3\n");
}

TEST_CASE("KeyValueConfig boolean spellings") {
    KeyValueConfig cfg;
    const std::map<std::string, bool> spellings{{"true", true}, {"1", true},   {"yes", true},
                                                {"on", true},   {"false", false}, {"0", false}};
    for (const auto& [text, expected] : spellings) {
        cfg.set("k", text);
        CHECK(cfg.get_bool("k", !expected) == expected);
    }
}

TEST_CASE("format_number trims trailing zeros") {
    CHECK(format_number(40.0) == "40");
    CHECK(format_number(0.25) == "0.25");
    CHECK(format_number(-12.5) == "-12.5");
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(100.0) == "100");
}

TEST_CASE("splitmix64 and derive_seed are deterministic and stream-separated") {
    uint64_t s1 = 42, s2 = 42;
    CHECK(splitmix64(s1) == splitmix64(s2));
    CHECK(s1 == s2);  // both advanced identically

    CHECK(derive_seed(7, 0) == derive_seed(7, 0));
    CHECK(derive_seed(7, 0) != derive_seed(7, 1));
    CHECK(derive_seed(7, 0) != derive_seed(8, 0));
}

TEST_CASE("Rng mappings respect their ranges and reproduce under one seed") {
    Rng a(123), b(123);
    for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng r(9);
    bool saw_lo = false, saw_hi = false;
    for (int i = 0; i < 2000; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const int64_t k = r.uniform_int(-2, 2);
        CHECK(k >= -2);
        CHECK(k <= 2);
        saw_lo |= (k == -2);
        saw_hi |= (k == 2);
        CHECK(r.uniform_index(5) < 5);
        const double v = r.uniform(10.0, 20.0);
        CHECK(v >= 10.0);
        CHECK(v <= 20.0);
    }
    CHECK(saw_lo);
    CHECK(saw_hi);

    Rng c(11);
    int heads = 0;
    for (int i = 0; i < 4000; ++i) heads += c.coin(0.25) ? 1 : 0;
    // 4000 draws at p=0.25: mean 1000, sigma ~27.4; allow 5 sigma.
    CHECK(heads > 1000 - 137);
    CHECK(heads < 1000 + 137);
}

TEST_CASE("error_code_name covers the pipeline codes used in reports") {
    CHECK(std::string(error_code_name(ErrorCode::parse_error)) == "ParseError");
    CHECK(std::string(error_code_name(ErrorCode::degenerate_solid)) == "DegenerateSolid");
    CHECK(std::string(error_code_name(ErrorCode::timeout)) == "Timeout");
    CHECK(std::string(error_code_name(ErrorCode::missing_key)) == "MissingKey");
    CHECK(std::string(error_code_name(ErrorCode::file_not_found)) == "FileNotFound");
}

TEST_CASE("ParseError carries its source location") {
    try {
        throw ParseError(3, 14, "unexpected token");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(e.col() == 14);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_SUITE_END();
