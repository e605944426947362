// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "loofaith/answer_eval.hpp"
#include "loofaith/embedding.hpp"
#include "loofaith/error.hpp"
#include "loofaith/explain.hpp"
#include "loofaith/faithfulness.hpp"
#include "loofaith/pipeline.hpp"
#include "loofaith/report.hpp"
#include "loofaith/text.hpp"
#include "test_support.hpp"

using namespace loofaith;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Collects failure messages for one criterion.
struct Check {
    std::vector<std::string> failures;
    void expect(bool ok, std::string what) {
        if (!ok && failures.size() < 5) failures.push_back(std::move(what));
        if (!ok) ++failed;
    }
    std::size_t failed = 0;
};

int g_failed = 0;

void criterion(std::string_view name, double limit_seconds, const std::function<void(Check&)>& body) {
    Check c;
    const auto start = Clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.expect(false, fmt::format("exception: {}", e.what()));
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    c.expect(secs < limit_seconds, fmt::format("took {:.3f}s, limit {}s", secs, limit_seconds));
    const bool ok = c.failed == 0;
    if (!ok) ++g_failed;
    fmt::print("{} {} ({:.3f}s, limit {}s)\n", ok ? "PASS" : "FAIL", name, secs, limit_seconds);
    for (const auto& f : c.failures) fmt::print("    {}\n", f);
    std::cout.flush();
}

// ---------------------------------------------------------------------------
// Independent oracles

std::size_t dp_distance(const std::string& a, const std::string& b) {
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
    return d[a.size()][b.size()];
}

std::vector<std::string> words_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

// Contiguous word-subsequence test over plain lowercase single-letter words.
bool oracle_contains(const std::string& text, const std::string& keyword) {
    const auto t = words_of(text), k = words_of(keyword);
    if (k.empty() || k.size() > t.size()) return false;
    for (std::size_t i = 0; i + k.size() <= t.size(); ++i)
        if (std::equal(k.begin(), k.end(), t.begin() + static_cast<std::ptrdiff_t>(i))) return true;
    return false;
}

// ---------------------------------------------------------------------------

void hybrid_metric() {
    criterion("hybrid metric conformance corpus", 1.0, [](Check& c) {
        struct Case {
            const char* gold;
            const char* answer;
            bool expected;
        };
        const Case corpus[] = {
            {"Paris", "Paris", true},
            {"Paris", "paris", true},
            {"Paris.", "Paris", true},
            {"The Beatles", "beatles", true},
            {"New  York", "New York", true},
            {"August 11 to 16 , 1965", "August 11 to 16, 1965", true},
            {"Elizabeth", "Elisabeth", false},  // fuzzy 89
            {"Washington", "Washingtin", true},  // fuzzy 90
            {"Los Angeles", "Los Angelis", true},  // fuzzy 91
            {"watts rebellion", "watts rebelion", true},
            {"Paris", "London", false},
            {"Abraham Lincoln", "George Washington", false},
            {"the United States", "United States.", true},
            {"Neil Armstrong", "Armstrong, Neil", true},
            {"August 16, 1965", "16 August 1965", true},
            {"September 3, 2001", "3 September 2001", true},
            {"1965-08-16", "1965-08-16", true},
            {"August 1965", "august 1965", true},
            {"1965", "1965.", true},
            {"August 16, 1965", "August 16, 1964", false},  // fuzzy 93, vetoed
            {"August 16, 1965", "August 17, 1965", false},
            {"September 3, 2001", "September 4, 2001", false},
            {"1965", "1964", false},
        };
        HashedNgramEmbedder embedder;
        const EvalConfig cfg;
        c.expect(std::size(corpus) >= 20, "corpus too small");
        for (const auto& k : corpus) {
            const std::vector<std::string> gold{k.gold};
            const auto v = evaluate(gold, k.answer, cfg, &embedder);
            c.expect(v.correct == k.expected, fmt::format("'{}' vs '{}': got {}", k.gold, k.answer, v.correct));
            c.expect(v.correct == combine(v.sub), "verdict inconsistent with its sub-results");
        }
        // threshold neighbourhood against the hand DP table
        const std::tuple<const char*, const char*, int> near[] = {
            {"elizabeth", "elisabeth", 89}, {"washington", "washingtin", 90}, {"los angeles", "los angelis", 91}};
        for (const auto& [a, b, want] : near) {
            const std::string sa(a), sb(b);
            const auto len = std::max(sa.size(), sb.size());
            const double exact = 100.0 * (1.0 - static_cast<double>(dp_distance(sa, sb)) / static_cast<double>(len));
            c.expect(static_cast<int>(std::lround(exact)) == want, fmt::format("oracle for {} gave {}", a, exact));
            c.expect(fuzzy_score(a, b) == want, fmt::format("fuzzy_score({}, {}) = {}", a, b, fuzzy_score(a, b)));
            c.expect((fuzzy_score(a, b) >= cfg.fuzzy_threshold) == (want >= 90), "threshold comparison");
        }
    });
}

// ---------------------------------------------------------------------------

void formula_oracle() {
    criterion("faithfulness formula oracle, 1000 random instances", 5.0, [](Check& c) {
        const std::vector<std::string> universe{"a", "b", "c", "d", "e"};
        auto gen = testing::rng(2024);
        auto text = [&](std::size_t lo, std::size_t hi) {
            std::string s;
            for (auto n = std::uniform_int_distribution<std::size_t>(lo, hi)(gen); n > 0; --n)
                s += (s.empty() ? "" : " ") + universe[gen() % universe.size()];
            return s;
        };
        for (int iter = 0; iter < 1000; ++iter) {
            ExplanationResult r;
            r.sample_id = std::to_string(iter);
            r.status = Status::ok;
            for (auto n = gen() % 5; n > 0; --n) r.self_keywords.push_back(text(1, 2));
            const std::size_t nr = 1 + gen() % 4;
            std::vector<std::string> region_text(nr);
            std::vector<std::vector<std::string>> group_text(nr);
            for (std::size_t i = 0; i < nr; ++i) {
                region_text[i] = text(1, 6);
                Region reg;
                reg.part_index = i;
                reg.words = tokenize(region_text[i]);
                reg.word_span = {0, reg.words.size()};
                r.sufficient_regions.push_back(reg);
                auto& groups = r.nk_by_region[i];
                for (std::size_t j = 0, ng = gen() % 6; j < ng; ++j) {
                    group_text[i].push_back(text(1, 2));
                    MaskGroup g;
                    g.part_index = i;
                    g.group_index = j;
                    g.words = tokenize(group_text[i].back());
                    g.word_span = {0, g.words.size()};
                    groups.push_back(g);
                }
            }

            // brute force: double loop over regions and groups
            bool scorable = false;
            double best = -1.0;
            std::size_t best_part = 0;
            for (std::size_t i = 0; i < nr; ++i) {
                if (group_text[i].empty()) continue;
                scorable = true;
                int fsr = 0;
                for (const auto& k : r.self_keywords) fsr = fsr || oracle_contains(region_text[i], k);
                std::size_t hits = 0;
                for (const auto& t : group_text[i]) {
                    int g = 0;
                    for (const auto& k : r.self_keywords) g = g || oracle_contains(t, k);
                    hits += static_cast<std::size_t>(g);
                }
                const double fnk = static_cast<double>(hits) / static_cast<double>(group_text[i].size());
                const double combined = (fsr + fnk) / 2.0;
                if (combined > best) {
                    best = combined;
                    best_part = i;
                }
            }

            if (!scorable) {
                bool threw = false;
                try {
                    sample_faithfulness(r);
                } catch (const NotScorable&) {
                    threw = true;
                }
                c.expect(threw, fmt::format("instance {} should be unscorable", iter));
                continue;
            }
            const auto s = sample_faithfulness(r);
            c.expect(s.f_i == best, fmt::format("instance {}: f_i {} vs oracle {}", iter, s.f_i, best));
            c.expect(s.argmax_part_index == best_part, fmt::format("instance {}: argmax differs", iter));
        }
    });
}

// ---------------------------------------------------------------------------

void loo_degeneracy() {
    criterion("leave-one-out degeneracy (p=|words|, q=1 and p=1, q=|words|)", 5.0, [](Check& c) {
        const std::vector<std::string> vocab{"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"};
        auto gen = testing::rng(77);
        for (int iter = 0; iter < 300; ++iter) {
            const std::size_t n = 1 + gen() % 12;
            std::vector<std::string> words(n);
            for (auto& w : words) w = vocab[gen() % vocab.size()];
            // the scripted model answers correctly iff every critical word is present
            std::set<std::string> critical;
            for (auto k = gen() % 3; k > 0; --k) critical.insert(vocab[gen() % vocab.size()]);
            auto correct_on = [critical](const std::string& context) {
                const auto present = words_of(context);
                return std::all_of(critical.begin(), critical.end(), [&](const std::string& w) {
                    return std::find(present.begin(), present.end(), w) != present.end();
                });
            };
            auto backend = std::make_shared<ScriptedChatBackend>([&](const PromptParts& p) {
                return testing::reply(p.context && correct_on(*p.context) ? "gold" : "nope");
            });
            ModelClient client(backend);
            const Sample sample{"s", "q?", join_words(words), {"gold"}};

            {  // p = |words|, q = 1
                Explainer ex(client, nullptr, EvalConfig{}, ExplainConfig{n, 1, NkMode::all_sufficient_regions});
                CallLedger ledger;
                const auto sr = ex.sufficient_regions(sample, ledger);
                std::vector<std::size_t> got, want;
                for (const auto& r : sr) got.push_back(r.part_index);
                for (std::size_t i = 0; i < n; ++i)
                    if (correct_on(words[i])) want.push_back(i);
                c.expect(got == want, fmt::format("case {}: single-word sufficient regions differ", iter));
                for (const auto& r : sr) {
                    const auto nk = ex.necessary_keywords(sample, r, ledger);
                    const bool want_nk = !correct_on("_");
                    c.expect(nk.size() == (want_nk ? 1u : 0u), fmt::format("case {}: single-word NK differs", iter));
                }
            }
            {  // p = 1, q = |words|: classic leave-one-out over the whole context
                Explainer ex(client, nullptr, EvalConfig{}, ExplainConfig{1, n, NkMode::all_sufficient_regions});
                CallLedger ledger;
                const auto sr = ex.sufficient_regions(sample, ledger);
                c.expect(sr.size() == (correct_on(join_words(words)) ? 1u : 0u), fmt::format("case {}: SR", iter));
                if (sr.empty()) continue;
                std::vector<std::size_t> got, want;
                for (const auto& g : ex.necessary_keywords(sample, sr[0], ledger)) got.push_back(g.group_index);
                for (std::size_t i = 0; i < n; ++i) {
                    auto masked = words;
                    masked[i] = "_";
                    if (!correct_on(join_words(masked))) want.push_back(i);
                }
                c.expect(got == want, fmt::format("case {}: leave-one-out NK differs", iter));
            }
        }
    });
}

// ---------------------------------------------------------------------------

void call_budget() {
    criterion("call budget ledger 2 + 3 + 15 = 20, then 20 cache hits", 5.0, [](Check& c) {
        testing::TempDir cache;
        std::atomic<int> sent{0};
        auto backend = std::make_shared<ScriptedChatBackend>([&](const PromptParts& p) {
            ++sent;
            if (!p.context) return testing::reply("UNKNOWN");
            const bool masked_date = p.context->find('_') != std::string::npos &&
                                     p.context->find("1965") == std::string::npos;
            return testing::reply(masked_date ? "no idea" : testing::kWattsAnswer, "August 11, 16, 1965");
        });
        HashedNgramEmbedder embedder;
        ExplanationResult first, second;
        {
            ModelClient client(backend, cache.path());
            Explainer ex(client, &embedder);
            first = ex.explain_sample(testing::watts_sample());
        }
        {
            ModelClient client(backend, cache.path());
            Explainer ex(client, &embedder);
            second = ex.explain_sample(testing::watts_sample());
        }
        c.expect(first.status == Status::ok, fmt::format("status {}", to_string(first.status)));
        c.expect(first.sufficient_regions.size() == 3, "all three regions should be sufficient");
        c.expect(first.ledger.total() == 20, fmt::format("first run total {}", first.ledger.total()));
        c.expect(first.ledger.cache_hits == 0, fmt::format("first run hits {}", first.ledger.cache_hits));
        c.expect(second.ledger.total() == 20, fmt::format("rerun total {}", second.ledger.total()));
        c.expect(second.ledger.cache_hits == 20, fmt::format("rerun hits {}", second.ledger.cache_hits));
        c.expect(second.ledger.network_calls() == 0, "rerun reached the backend");
        c.expect(sent == 20, fmt::format("backend saw {} requests", sent.load()));
    });
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void determinism() {
    criterion("end-to-end determinism over the 5-sample mock fixture", 10.0, [](Check& c) {
        const fs::path data = LOOFAITH_TEST_DATA;
        testing::TempDir a, b;
        std::ostringstream log;
        for (const auto* dir : {&a, &b}) {
            RunConfig cfg;
            cfg.dataset_path = data / "mock_dataset.jsonl";
            cfg.mock_fixture = data / "mock_fixture.json";
            cfg.provider.model_id = "mock";
            cfg.output_dir = dir->path();
            cfg.concurrency = dir == &a ? 1 : 4;
            c.expect(cmd_run(cfg, log) == kExitOk, "cmd_run failed: " + log.str());
        }
        const auto ra = slurp(a / "results.jsonl");
        c.expect(!ra.empty(), "empty results");
        c.expect(std::count(ra.begin(), ra.end(), '\n') == 5, "expected 5 records");
        c.expect(ra == slurp(b / "results.jsonl"), "results.jsonl differs between runs");
    });
}

// ---------------------------------------------------------------------------

void watts_figure() {
    criterion("Watts riots scenario: f_sr = 1, f_nk = 0.5, highlighted card", 1.0, [](Check& c) {
        auto backend = std::make_shared<ScriptedChatBackend>(testing::watts_script);
        ModelClient client(backend);
        HashedNgramEmbedder embedder;
        Explainer ex(client, &embedder);
        const auto r = ex.explain_sample(testing::watts_sample());
        c.expect(r.status == Status::ok, "status");
        c.expect(r.self_keywords == std::vector<std::string>{"August 11", "16", "1965"}, "self keywords");
        const auto s = sample_faithfulness(r);
        c.expect(s.per_region.size() == 1, "one scorable region");
        if (s.per_region.size() != 1) return;
        const auto& reg = s.per_region[0];
        // NK groups: "from August", "11 to", "16,", "1965." -> hits 0, 0, 1, 1
        c.expect(reg.part_index == 2, "date-bearing region");
        c.expect(reg.f_sr == 1, "f_sr");
        c.expect(reg.hits == std::vector<int>{0, 0, 1, 1}, "hits");
        c.expect(reg.f_nk == 0.5, fmt::format("f_nk {}", reg.f_nk));
        c.expect(s.f_i == 0.75, fmt::format("f_i {}", s.f_i));

        const auto html = render_sample_html(testing::watts_sample(), r, s);
        const auto blue = fmt::format(R"(<span class="nk" style="background:{}">)", kBlue);
        const auto green = fmt::format(R"(<span class="sr" style="background:{}">)", kGreen);
        c.expect(html.find(green + "Los Angeles </span>") != std::string::npos, "green region");
        c.expect(html.find(blue + "<b>August</b></span>") != std::string::npos, "blue+bold August");
        c.expect(html.find(blue + "<b>16,</b></span>") != std::string::npos, "blue+bold 16,");
        c.expect(html.find(blue + "<b>1965.</b></span>") != std::string::npos, "blue+bold 1965.");
    });
}

// ---------------------------------------------------------------------------

void table_one() {
    criterion("stage table reproduces the published counts and scores", 1.0, [](Check& c) {
        const StageStats gpt35{311, 224, 119, 100, 62, 0.653};
        const StageStats gpt4o{311, 227, 177, 149, 62, 0.691};
        const auto t = render_stats_table({{"GPT-3.5", gpt35}, {"GPT-4o", gpt4o}});
        for (const char* n : {"311", "224", "227", "119", "177", "100", "149", "62", "0.653", "0.691"}) {
            c.expect(t.text.find(n) != std::string::npos, fmt::format("{} missing from text table", n));
            c.expect(t.html.find(n) != std::string::npos, fmt::format("{} missing from html table", n));
        }
        std::cout << t.text;
    });
}

// ---------------------------------------------------------------------------

void invariants() {
    criterion("randomized invariant suites, 1000 cases each", 30.0, [](Check& c) {
        auto gen = testing::rng(99);
        const std::vector<std::string> vocab{"a", "Bb", "c,", "dd.", "E", "f-g", "été", "1965", "the", "August"};
        auto random_words = [&](std::size_t max_len) {
            WordSeq w(gen() % (max_len + 1));
            for (auto& x : w) x = vocab[gen() % vocab.size()];
            return w;
        };

        // text: split round-trip, balance, mask counts
        for (int i = 0; i < 1000; ++i) {
            const auto words = random_words(40);
            const std::size_t p = 1 + gen() % 10, q = 1 + gen() % 10;
            const auto parts = split_into_parts(words, p);
            WordSeq rebuilt;
            std::size_t lo = SIZE_MAX, hi = 0;
            for (const auto& r : parts) {
                rebuilt.insert(rebuilt.end(), r.words.begin(), r.words.end());
                lo = std::min(lo, r.words.size());
                hi = std::max(hi, r.words.size());
                const auto groups = split_into_groups(r, q);
                c.expect(groups.size() == std::min(q, r.words.size()), "group count");
                for (const auto& g : groups) {
                    const auto masked = tokenize(mask_group(r, g));
                    c.expect(masked.size() == r.words.size() - g.words.size() + 1, "mask word count");
                    c.expect(std::count(masked.begin(), masked.end(), "_") == 1, "one mask token");
                }
            }
            c.expect(rebuilt == words, "split round-trip");
            c.expect(parts.empty() || hi - lo <= 1, "balance");
            c.expect(parts.size() == std::min(p, words.size()), "part count");
        }

        // answer_eval: reflexivity, gold-set monotonicity, symmetry, date gate, consistency
        HashedNgramEmbedder embedder;
        const EvalConfig cfg;
        for (int i = 0; i < 1000; ++i) {
            const auto x = join_words(random_words(5));
            const auto y = join_words(random_words(5));
            if (!normalize_whitespace(x).empty()) {
                const std::vector<std::string> gx{x};
                c.expect(evaluate(gx, x, cfg, &embedder).correct, "reflexivity: " + x);
            }
            c.expect(fuzzy_score(x, y) == fuzzy_score(y, x), "fuzzy symmetry");
            c.expect((fuzzy_score(x, y) == 100) == (normalize_answer(x) == normalize_answer(y)), "fuzzy 100 iff equal");
            const std::vector<std::string> one{y.empty() ? "z" : y};
            const std::vector<std::string> two{one[0], x.empty() ? "z" : x};
            const auto v1 = evaluate(one, x, cfg, &embedder);
            const auto v2 = evaluate(two, x, cfg, &embedder);
            c.expect(!v1.correct || v2.correct, "gold-set monotonicity");
            c.expect(v1.correct == combine(v1.sub), "verdict consistency");
        }
        for (int i = 0; i < 1000; ++i) {
            const int y1 = 1900 + static_cast<int>(gen() % 120), y2 = 1900 + static_cast<int>(gen() % 120);
            const int d1 = 1 + static_cast<int>(gen() % 28), d2 = 1 + static_cast<int>(gen() % 28);
            const auto a = fmt::format("March {}, {}", d1, y1);
            const auto b = fmt::format("{} March {}", d2, y2);
            const std::vector<std::string> gold{a};
            const bool same = y1 == y2 && d1 == d2;
            c.expect(evaluate(gold, b, cfg, &embedder).correct == same, "date gate: " + a + " / " + b);
        }

        // faithfulness ranges and keyword monotonicity
        for (int i = 0; i < 1000; ++i) {
            ExplanationResult r;
            r.status = Status::ok;
            const std::size_t nr = 1 + gen() % 4;
            for (std::size_t k = 0; k < nr; ++k) {
                Region reg;
                reg.part_index = k;
                reg.words = random_words(6);
                if (reg.words.empty()) reg.words = {"a"};
                reg.word_span = {0, reg.words.size()};
                for (const auto& g : split_into_groups(reg, 1 + gen() % 5))
                    if (gen() % 2) r.nk_by_region[k].push_back(g);
                r.sufficient_regions.push_back(std::move(reg));
            }
            if (r.nk_by_region[0].empty()) r.nk_by_region[0] = split_into_groups(r.sufficient_regions[0], 1);
            for (auto n = gen() % 4; n > 0; --n) r.self_keywords.push_back(vocab[gen() % vocab.size()]);
            const auto s = sample_faithfulness(r);
            c.expect(s.f_i >= 0.0 && s.f_i <= 1.0, "f_i range");
            for (const auto& rf : s.per_region) {
                c.expect(rf.f_sr == 0 || rf.f_sr == 1, "f_sr range");
                c.expect(rf.f_nk >= 0.0 && rf.f_nk <= 1.0, "f_nk range");
                c.expect(rf.combined == (rf.f_sr + rf.f_nk) / 2.0, "combined");
            }
            auto more = r;
            more.self_keywords.push_back(vocab[gen() % vocab.size()]);
            c.expect(sample_faithfulness(more).f_i >= s.f_i, "keyword monotonicity");
            const std::vector<SampleFaithfulness> pair{s, sample_faithfulness(more)};
            const auto corpus = corpus_faithfulness(pair);
            c.expect(corpus.F && *corpus.F >= 0.0 && *corpus.F <= 1.0, "F range");
        }

        // report: funnel monotonicity of stats computed from any record set
        const Status statuses[] = {Status::ok, Status::not_retrieval_hard, Status::wrong_with_context,
                                   Status::no_sufficient_region, Status::no_necessary_keywords,
                                   Status::provider_error, Status::parse_error};
        for (int i = 0; i < 1000; ++i) {
            std::vector<std::pair<std::string, std::vector<ResultRecord>>> runs(2);
            for (auto& [label, records] : runs) {
                label = "m";
                for (std::size_t k = 0, n = gen() % 15; k < n; ++k) {
                    ResultRecord r;
                    r.id = std::to_string(k);
                    r.status = statuses[gen() % std::size(statuses)];
                    r.retrieval_hard = r.status != Status::not_retrieval_hard;
                    if (r.status == Status::ok) r.faithfulness = FaithfulnessRecord{{}, (gen() % 5) / 4.0, 0};
                    records.push_back(std::move(r));
                }
            }
            for (const auto& [label, s] : compare_models(runs)) {
                bool ok = true;
                try {
                    s.validate();
                } catch (const InvariantViolation&) {
                    ok = false;
                }
                c.expect(ok, "funnel monotonicity");
            }
        }
    });
}

}  // namespace

int main() {
    hybrid_metric();
    formula_oracle();
    loo_degeneracy();
    call_budget();
    determinism();
    watts_figure();
    table_one();
    invariants();
    fmt::print("{} of 8 criteria passed\n", 8 - g_failed);
    return g_failed == 0 ? 0 : 1;
}
