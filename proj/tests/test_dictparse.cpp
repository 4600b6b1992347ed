#include <doctest.h>

#include <random>

#include "nmt/common.hpp"
#include "nmt/dictparse.hpp"

using namespace nmt;
using namespace nmt::dictparse;

namespace {
const std::string kFixtureDir = NMT_TEST_FIXTURES;
}

TEST_SUITE_BEGIN("dictparse");

TEST_CASE("strip_metadata removes grouping symbols") {
    CHECK(strip_metadata("Ritter {m} [hist.]") == "Ritter");
    CHECK(strip_metadata("hero") == "hero");
    CHECK(strip_metadata("Schwellung {f} (Anschwellen) [med.]") == "Schwellung");
    CHECK(strip_metadata("masculine noun {m} term [biol.]") == "masculine noun term");
    // Unbalanced opener drops the remainder of the fragment.
    CHECK(strip_metadata("word (never closed") == "word");
    CHECK(strip_metadata("  spaced   out  ") == "spaced out");
    CHECK(strip_metadata("") == "");
}

TEST_CASE("strip_metadata is idempotent") {
    std::mt19937 rng(7);
    const std::string alphabet = "ab {}[]()x.;|";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::uniform_int_distribution<int> len(0, 24);
    for (int i = 0; i < 500; ++i) {
        std::string s;
        int n = len(rng);
        for (int k = 0; k < n; ++k) s.push_back(alphabet[pick(rng)]);
        std::string once = strip_metadata(s);
        CHECK(strip_metadata(once) == once);
    }
}

TEST_CASE("filter_headword implements the five rules") {
    CHECK_FALSE(filter_headword("bei jdm./etw.").has_value());
    CHECK(filter_headword("sich anschließen") == "anschließen");
    CHECK(filter_headword("Tarnkappe") == "Tarnkappe");
    CHECK_FALSE(filter_headword("100prozentig").has_value());
    CHECK_FALSE(filter_headword("jdm. etw. anbieten").has_value());
    CHECK_FALSE(filter_headword("auf etw.").has_value());
    CHECK_FALSE(filter_headword("Haus!").has_value());
    CHECK(filter_headword("im eigenen Tempo") == "im eigenen Tempo");
    CHECK(filter_headword("E-Mail") == "E-Mail");
    // Only the exact dotted abbreviations drop; "jemand" stays.
    CHECK(filter_headword("jemand") == "jemand");
    // "sich" alone is not a prefix occurrence.
    CHECK(filter_headword("sich") == "sich");
    CHECK_FALSE(filter_headword("").has_value());
    CHECK_FALSE(filter_headword("sich ").has_value());
}

TEST_CASE("parse_line pairs sense slots") {
    bool malformed = false;
    auto entries = parse_line("kühn {adj} :: bold; brave", &malformed);
    REQUIRE(entries.size() == 1);
    CHECK_FALSE(malformed);
    CHECK(entries[0].headword == "kühn");
    CHECK(entries[0].senses == std::vector<std::string>{"bold", "brave"});

    entries = parse_line("Held {m} | Helden {pl} :: hero | heroes", &malformed);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].headword == "Held");
    CHECK(entries[0].senses == std::vector<std::string>{"hero"});
    CHECK(entries[1].headword == "Helden");
    CHECK(entries[1].senses == std::vector<std::string>{"heroes"});

    entries = parse_line("no delimiter here", &malformed);
    CHECK(entries.empty());
    CHECK(malformed);

    entries = parse_line("a | b :: only-one-slot", &malformed);
    CHECK(entries.empty());
    CHECK(malformed);

    // Synonyms on the headword side each take the full sense slot.
    entries = parse_line("Zustand {m}; Lage {f} :: state; condition", &malformed);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].headword == "Zustand");
    CHECK(entries[1].headword == "Lage");
    CHECK(entries[0].senses == entries[1].senses);
}

// Tiny reference parser for the slot-pairing rule: no filtering, just the
// ::/|/; grammar, used to cross-check parse_line's pairing on clean inputs.
namespace {
std::vector<std::pair<std::string, std::vector<std::string>>> naive_pairs(
    const std::string& line) {
    auto sep = line.find("::");
    auto heads = split(line.substr(0, sep), '|');
    auto defs = split(line.substr(sep + 2), '|');
    std::vector<std::pair<std::string, std::vector<std::string>>> out;
    for (std::size_t i = 0; i < heads.size(); ++i) {
        std::vector<std::string> senses;
        for (auto& d : split(defs[i], ';')) senses.push_back(trim(d));
        for (auto& h : split(heads[i], ';')) out.emplace_back(trim(h), senses);
    }
    return out;
}
}  // namespace

TEST_CASE("parse_line matches the reference pairing on clean lines") {
    const std::vector<std::string> lines = {
        "eins :: one",
        "zwei | drei :: two | three",
        "vier; fünf :: four; five",
        "sechs | sieben; acht :: six | seven; eight",
    };
    for (const auto& line : lines) {
        auto got = parse_line(line);
        auto expected = naive_pairs(line);
        REQUIRE(got.size() == expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].headword == expected[i].first);
            CHECK(got[i].senses == expected[i].second);
        }
    }
}

TEST_CASE("parse_line never yields empty headwords or senses") {
    std::mt19937 rng(11);
    const std::string alphabet = "ab ;|:{}";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::uniform_int_distribution<int> len(0, 20);
    for (int i = 0; i < 1000; ++i) {
        std::string s;
        int n = len(rng);
        for (int k = 0; k < n; ++k) s.push_back(alphabet[pick(rng)]);
        for (const auto& e : parse_line(s)) {
            CHECK_FALSE(e.headword.empty());
            CHECK_FALSE(e.senses.empty());
            for (const auto& sense : e.senses) CHECK_FALSE(sense.empty());
        }
    }
}

TEST_CASE("build_dictionary merges duplicates and counts") {
    SUBCASE("two lines defining the same headword merge in order") {
        auto dict = build_dictionary({"kühn :: bold; brave", "kühn :: audacious; bold"});
        CHECK(dict.size() == 1);
        CHECK(dict.lookup("kühn") == std::vector<std::string>{"bold", "brave", "audacious"});
    }
    SUBCASE("empty input") {
        auto dict = build_dictionary({});
        CHECK(dict.size() == 0);
    }
    SUBCASE("10-line fixture with 2 malformed") {
        ParseStats stats;
        auto dict = build_dictionary(
            {
                "eins :: one",
                "zwei :: two",
                "broken line",
                "drei :: three",
                "vier :: four; IV",
                "un :: even :: worse",
                "fünf :: five",
                "sechs {num} :: six",
                "# comment line, not counted",
                "sieben :: seven",
            },
            &stats);
        CHECK(stats.lines_read == 9);  // the '#' line is a comment
        CHECK(stats.lines_skipped == 2);
        CHECK(stats.entries_kept == 7);
        CHECK(dict.size() == 7);
    }
}

TEST_CASE("lookup is exact and total") {
    auto dict = build_dictionary_from_file(kFixtureDir + "/dict_50.txt");
    CHECK(dict.lookup("Tarnkappe") == std::vector<std::string>{"invisibility cloak"});
    CHECK(dict.lookup("xyzzy").empty());
    CHECK(dict.lookup("tarnkappe").empty());  // case-sensitive

    auto senses = dict.lookup("Schwellung");
    REQUIRE(senses.size() == 12);
    CHECK(senses[0] == "swelling-up");
    CHECK(senses[1] == "swelling");
    CHECK(senses[2] == "puffiness");
}

TEST_CASE("50-line fixture yields the hand-verified entry set") {
    ParseStats stats;
    auto dict = build_dictionary_from_file(kFixtureDir + "/dict_50.txt", &stats);
    CHECK(stats.lines_read == 48);
    CHECK(stats.lines_skipped == 3);
    CHECK(stats.entries_kept == 38);
    CHECK(dict.size() == 38);

    // Filter rule outcomes.
    CHECK_FALSE(dict.contains("bei jdm./etw."));
    CHECK_FALSE(dict.contains("jdm. etw. anbieten"));
    CHECK_FALSE(dict.contains("auf etw."));
    CHECK_FALSE(dict.contains("100prozentig"));
    CHECK_FALSE(dict.contains("¡Hola!"));
    CHECK(dict.lookup("anschließen") == std::vector<std::string>{"to join"});
    CHECK(dict.lookup("freuen") == std::vector<std::string>{"to be glad", "to rejoice"});
    CHECK(dict.contains("sich"));
    CHECK(dict.contains("im eigenen Tempo"));
    CHECK(dict.contains("E-Mail"));
    CHECK(dict.contains("jdmx"));  // no dot, so rule 3 does not apply

    // Merging and de-duplication.
    CHECK(dict.lookup("kühn") == std::vector<std::string>{"bold", "brave", "audacious"});
    CHECK(dict.lookup("Burg") == std::vector<std::string>{"castle", "fortress"});

    // Metadata handling.
    CHECK(dict.lookup("unbalanced") == std::vector<std::string>{"dropped remainder"});
    CHECK(dict.lookup("Drache") == std::vector<std::string>{"dragon"});
    CHECK(dict.lookup("Hund") == std::vector<std::string>{"dog"});
    CHECK(dict.lookup("Hunde") == std::vector<std::string>{"dogs"});
    CHECK_FALSE(dict.contains("Pferd"));  // slot-count mismatch is malformed

    // Every surviving headword passes the filter under its own name.
    for (const auto& [head, senses] : dict.entries()) {
        auto kept = filter_headword(head);
        REQUIRE(kept.has_value());
        CHECK(*kept == head);
        CHECK_FALSE(senses.empty());
    }
}

TEST_CASE("dictionary TSV round trip") {
    auto dict = build_dictionary_from_file(kFixtureDir + "/dict_50.txt");
    std::string path = "dict_roundtrip.tsv";
    dict.save_tsv(path);
    auto loaded = Dictionary::load_tsv(path);
    CHECK(loaded.entries() == dict.entries());
    std::remove(path.c_str());
}

TEST_SUITE_END();
