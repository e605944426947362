#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "loofaith/dataset.hpp"
#include "loofaith/error.hpp"
#include "test_support.hpp"

using namespace loofaith;
using json = nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ResultRecord sample_record() {
    ResultRecord r;
    r.id = "watts";
    r.status = Status::ok;
    r.retrieval_hard = true;
    r.answer_no_context = "UNKNOWN";
    r.answer_original = "August 11 to 16, 1965";
    r.thought = "from August 11 to 16";
    r.model_keywords = {"August 11", "16", "1965"};
    r.sufficient_regions = {{2, {17, 25}, {107, 146}, "Los Angeles from August 11 to 16, 1965."}};
    r.necessary_keywords = {{2, {{1, {2, 4}, "from August"}, {3, {6, 7}, "16,"}}}};
    r.faithfulness = FaithfulnessRecord{{{2, 1, 1.0 / 3.0, 2.0 / 3.0, {0, 1}}}, 2.0 / 3.0, 2};
    r.calls.calls_no_context = 1;
    r.calls.calls_original_context = 1;
    r.calls.calls_sr = 3;
    r.calls.calls_nk = 5;
    return r;
}

}  // namespace

TEST_CASE("load_dataset reads valid lines and skips broken ones") {
    testing::TempDir dir;
    {
        std::ofstream f(dir / "d.jsonl");
        f << json{{"id", "watts"}, {"question", testing::kWattsQuestion}, {"context", testing::kWattsContext},
                  {"answers", {testing::kWattsGold}}}
                 .dump()
          << "\n";
        f << R"({"question":"q","context":"c","answers":[]})" << "\n";  // no answers
        f << "\n";
        f << "not json\n";
        f << R"({"question":"q2","context":"c2","answers":["a"]})" << "\n";  // no id
        f << R"({"id":"watts","question":"q3","context":"c3","answers":["a"]})" << "\n";  // duplicate
    }
    const auto ds = load_dataset(dir / "d.jsonl");
    REQUIRE(ds.size() == 2);
    CHECK(ds.samples[0] == testing::watts_sample());
    CHECK(ds.samples[1].id == "line-5");
    CHECK(ds.skipped == 3);
    CHECK(ds.diagnostics.size() == 3);
}

TEST_CASE("load_dataset failures") {
    testing::TempDir dir;
    CHECK_THROWS_AS(load_dataset(dir / "missing.jsonl"), IOError);
    std::ofstream(dir / "empty.jsonl") << "";
    CHECK_THROWS_AS(load_dataset(dir / "empty.jsonl"), EmptyDataset);
    std::ofstream(dir / "bad.jsonl") << "{}\n[]\n";
    CHECK_THROWS_AS(load_dataset(dir / "bad.jsonl"), EmptyDataset);
}

TEST_CASE("save_dataset and load_dataset round-trip") {
    testing::TempDir dir;
    const std::vector<Sample> samples{testing::watts_sample(), {"b", "q?", "ctx", {"x", "y"}}};
    save_dataset(dir / "out.jsonl", samples);
    CHECK(load_dataset(dir / "out.jsonl").samples == samples);
}

TEST_CASE("Status names round-trip") {
    for (auto s : {Status::ok, Status::not_retrieval_hard, Status::wrong_with_context, Status::no_sufficient_region,
                   Status::no_necessary_keywords, Status::provider_error, Status::parse_error})
        CHECK(status_from_string(to_string(s)) == s);
    CHECK(to_string(Status::no_sufficient_region) == "no_sufficient_region");
    CHECK_THROWS_AS(status_from_string("bogus"), InvalidParameter);
}

TEST_CASE("result records round-trip through JSON lines") {
    testing::TempDir dir;
    ResultRecord failed;
    failed.id = "f";
    failed.status = Status::provider_error;
    failed.error = "HTTP 500";

    const auto rec = sample_record();
    save_results(dir / "r.jsonl", {rec, failed});
    const auto back = load_results(dir / "r.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[1] == failed);
    CHECK(back[0].id == rec.id);
    CHECK(back[0].sufficient_regions == rec.sufficient_regions);
    CHECK(back[0].necessary_keywords == rec.necessary_keywords);
    CHECK(back[0].faithfulness->f_i == doctest::Approx(2.0 / 3.0).epsilon(1e-6));

    // a second save of the loaded records is byte-identical
    save_results(dir / "r2.jsonl", back);
    CHECK(slurp(dir / "r.jsonl") == slurp(dir / "r2.jsonl"));
}

TEST_CASE("record JSON key order and nulls") {
    ResultRecord r;
    r.id = "x";
    r.status = Status::not_retrieval_hard;
    r.retrieval_hard = false;
    const auto line = to_jsonl_line(r);
    CHECK(line.find("\"id\"") < line.find("\"status\""));
    CHECK(line.find("\"status\"") < line.find("\"retrieval_hard\""));
    const auto j = json::parse(line);
    CHECK(j.at("faithfulness").is_null());
    CHECK(j.at("status") == "not_retrieval_hard");
    CHECK(j.at("calls").at("total") == 0);
}

TEST_CASE("ResultAppender appends") {
    testing::TempDir dir;
    {
        ResultAppender a(dir / "r.jsonl");
        a.append(sample_record());
    }
    {
        ResultAppender a(dir / "r.jsonl");
        auto r = sample_record();
        r.id = "second";
        a.append(r);
    }
    const auto all = load_results(dir / "r.jsonl");
    REQUIRE(all.size() == 2);
    CHECK(all[1].id == "second");
}

TEST_CASE("load_results rejects a corrupt line") {
    testing::TempDir dir;
    std::ofstream(dir / "r.jsonl") << "{broken\n";
    CHECK_THROWS_AS(load_results(dir / "r.jsonl"), IOError);
    CHECK_THROWS_AS(load_results(dir / "missing.jsonl"), IOError);
}
