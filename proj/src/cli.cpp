#include "wayfinder/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "wayfinder/errors.hpp"
#include "wayfinder/text.hpp"

#ifndef WAYFINDER_DATA_DIR
#define WAYFINDER_DATA_DIR "data"
#endif

namespace wayfinder {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PreconditionError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PreconditionError("cannot write " + path.string());
    out << content;
}

std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string fmt4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string join_lines(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) {
        if (!s.empty()) s += "\n";
        s += x;
    }
    return s;
}

std::shared_ptr<const SiteFixture> load_named_fixture(const std::string& name) {
    return std::make_shared<const SiteFixture>(load_fixture(resolve_fixture_path(name)));
}

void apply_module_flags(AgentConfig& agent, const std::string& modules, bool no_vlm, bool no_stack,
                        bool no_counter) {
    if (!modules.empty()) {
        auto t = ModuleToggles::from_label(modules);
        if (!t) throw UsageError("--modules: expected a subset label such as CSU or {}, got " + modules);
        agent.toggles = *t;
    }
    if (no_vlm) agent.toggles.vlm_on = false;
    if (no_stack) agent.toggles.stack_on = false;
    if (no_counter) agent.toggles.counter_on = false;
}

struct Range {
    double lo = 0, hi = 0, step = 0;
};

Range parse_range(const std::string& s) {
    std::vector<double> parts;
    std::stringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::logic_error&) {
            throw UsageError("--range: not a number: " + tok);
        }
    }
    if (parts.size() != 3) throw UsageError("--range: expected LO:HI:STEP, got " + s);
    Range r{parts[0], parts[1], parts[2]};
    if (r.step <= 0 || r.hi < r.lo || r.lo < 0 || r.hi > 100)
        throw UsageError("--range: need 0 <= LO <= HI <= 100 and STEP > 0, got " + s);
    return r;
}

Quotas parse_quotas(const std::string& s) {
    std::vector<std::size_t> parts;
    std::stringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ':')) {
        if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
            throw UsageError("--quotas: expected E:M:H counts, got " + s);
        parts.push_back(std::stoull(tok));
    }
    if (parts.size() != 3) throw UsageError("--quotas: expected E:M:H counts, got " + s);
    return Quotas::uniform(parts[0], parts[1], parts[2]);
}

std::optional<double> parse_baseline(const std::string& s) {
    if (s.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::logic_error&) {
    }
    const auto j = nlohmann::json::parse(read_file(s), nullptr, false);
    if (j.is_discarded() || !j.contains("accuracy")) throw ParseError("--baseline: no accuracy in " + s);
    return j["accuracy"].get<double>();
}

std::shared_ptr<Reasoner> role_backend(const BackendsConfig& backends, const std::string& flag, const char* role) {
    if (!flag.empty()) return make_role_reasoner(backends, flag);
    auto it = backends.per_role.find(role);
    if (it != backends.per_role.end()) return make_role_reasoner(backends, it->second);
    return nullptr;
}

struct EvalOutput {
    std::vector<EvalRecord> records;
    Report report;
};

EvalOutput evaluate_all(const std::vector<QAItem>& items, const std::vector<Prediction>& preds, Reasoner* judge_backend,
                        Reasoner& classifier, const RefusalPhrases& phrases) {
    std::map<std::string, const QAItem*> index;
    for (const auto& it : items) index[it.id] = &it;
    EvalOutput out;
    for (const auto& p : preds) {
        auto it = index.find(p.qa_id);
        if (it == index.end()) throw JoinError("prediction for unknown qa_id " + p.qa_id);
        out.records.push_back(evaluate_one(*it->second, p, judge_backend, &classifier, phrases));
    }
    out.report = aggregate(out.records, items);
    return out;
}

std::string records_to_jsonl(const std::vector<EvalRecord>& records) {
    std::string s;
    for (const auto& r : records)
        s += nlohmann::json{{"qa_id", r.qa_id},
                            {"prediction", r.prediction},
                            {"correct", r.correct},
                            {"category", to_string(r.category)},
                            {"judge_reasoning", r.judge_reasoning}}
                 .dump() +
             "\n";
    return s;
}

}  // namespace

std::string resolve_fixture_path(const std::string& name_or_path) {
    if (fs::is_regular_file(name_or_path)) return name_or_path;
    if (fs::is_directory(name_or_path) && fs::is_regular_file(fs::path(name_or_path) / "site.json"))
        return (fs::path(name_or_path) / "site.json").string();
    const char* env = std::getenv("WAYFINDER_DATA_DIR");
    const fs::path base = env && *env ? fs::path(env) : fs::path(WAYFINDER_DATA_DIR);
    const auto candidate = base / "fixtures" / name_or_path / "site.json";
    if (fs::is_regular_file(candidate)) return candidate.string();
    throw PreconditionError("no fixture named or located at " + name_or_path);
}

std::vector<Prediction> run_batch(const std::vector<QAItem>& items, const std::string& default_root,
                                  const EnvironmentFactory& make_env, const BatchOptions& opts) {
    std::vector<Prediction> preds(items.size());
    const auto scorer = make_relevance_scorer(opts.backends);
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr fatal;

    auto worker = [&] {
        auto env = make_env();
        for (std::size_t i = next++; i < items.size(); i = next++) {
            const auto& item = items[i];
            auto& p = preds[i];
            p.qa_id = item.id;
            const std::string root = item.root_url.empty() ? default_root : item.root_url;
            try {
                auto reasoner = make_role_reasoner(opts.backends, opts.reasoner_override, item.id);
                const auto ep = run_episode(item.question, root, *env, *reasoner, opts.agent, scorer);
                if (ep.outcome == Outcome::answered) p.prediction = ep.answer;
                p.context = join_lines(ep.accumulated_info);
                if (!opts.traces_dir.empty())
                    write_file(fs::path(opts.traces_dir) / (item.id + ".jsonl"), episode_to_jsonl(ep));
            } catch (const EnvUnavailable& e) {
                p.context = std::string("error: ") + e.what();
            } catch (const ReasonerProtocol& e) {
                p.context = std::string("error: ") + e.what();
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!fatal) fatal = std::current_exception();
                next = items.size();
            }
        }
    };

    const std::size_t jobs = std::max<std::size_t>(1, std::min(opts.jobs, items.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (fatal) std::rethrow_exception(fatal);
    return preds;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Web navigation agent, benchmark builder and evaluation toolkit", "wayfinder"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    std::string config_path;
    app.add_option("--config", config_path, "INI config file (else $WAYFINDER_CONFIG)");

    // run
    auto* run = app.add_subcommand("run", "Run one episode and emit its trace");
    std::string query, root, fixture, trace_path, modules, reasoner_spec;
    bool no_vlm = false, no_stack = false, no_counter = false;
    std::size_t step_cap = 0;
    run->add_option("--query", query, "Question to answer")->required();
    auto* root_opt = run->add_option("--root", root, "Live root URL");
    auto* fix_opt = run->add_option("--fixture", fixture, "Fixture name or site.json path");
    root_opt->excludes(fix_opt);
    run->add_flag("--no-vlm", no_vlm, "Disable the vision branch");
    run->add_flag("--no-stack", no_stack, "Disable the URL stack");
    run->add_flag("--no-counter", no_counter, "Disable the symbolic counter");
    run->add_option("--modules", modules, "Enabled module subset, e.g. CSU, SU or {}");
    run->add_option("--trace", trace_path, "Write the JSONL trace here instead of stdout");
    run->add_option("--reasoner", reasoner_spec, "Backend spec: script://PATH, heuristic://, http(s)://...");
    run->add_option("--step-cap", step_cap, "Override [agent] step_cap")->check(CLI::Range(1, 1000));

    // batch
    auto* batch = app.add_subcommand("batch", "Run every benchmark item and write predictions");
    std::string bench_path, out_path, traces_dir;
    std::size_t jobs = 1;
    batch->add_option("--benchmark", bench_path, "Benchmark JSONL")->required()->check(CLI::ExistingFile);
    batch->add_option("--out", out_path, "Predictions JSONL")->required();
    batch->add_option("--fixture", fixture, "Serve pages from this fixture instead of the live web");
    batch->add_option("--jobs", jobs, "Concurrent episodes")->check(CLI::Range(1, 256));
    batch->add_option("--modules", modules, "Enabled module subset");
    batch->add_option("--reasoner", reasoner_spec, "Backend spec for every role");
    batch->add_option("--traces", traces_dir, "Directory for per-item traces");
    batch->add_option("--step-cap", step_cap, "Override [agent] step_cap")->check(CLI::Range(1, 1000));

    // bench generate
    auto* bench = app.add_subcommand("bench", "Benchmark construction");
    bench->require_subcommand(1);
    auto* gen = bench->add_subcommand("generate", "Crawl roots and synthesize vetted QA items");
    std::string roots_path, date, quotas, generator_spec, teacher_spec, domain = "conference", language;
    std::optional<std::uint64_t> seed;
    auto* roots_opt = gen->add_option("--roots", roots_path, "Root list file")->check(CLI::ExistingFile);
    auto* gfix_opt = gen->add_option("--fixture", fixture, "Crawl this fixture instead of live roots");
    roots_opt->excludes(gfix_opt);
    gen->add_option("--out", out_path, "Benchmark JSONL")->required();
    gen->add_option("--seed", seed, "Sampling seed");
    gen->add_option("--date", date, "Manifest date (YYYY-MM-DD)");
    gen->add_option("--quotas", quotas, "Per-kind quotas E:M:H");
    gen->add_option("--generator", generator_spec, "Generator backend spec");
    gen->add_option("--teacher", teacher_spec, "Teacher backend spec");
    gen->add_option("--domain", domain, "Domain for --fixture roots");
    gen->add_option("--language", language, "Language for --fixture roots (en, zh)");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Judge predictions and write report tables");
    std::string preds_path, report_dir, baseline, judge_spec, classifier_spec;
    evaluate->add_option("--benchmark", bench_path, "Benchmark JSONL")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--predictions", preds_path, "Predictions JSONL")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--out", report_dir, "Report directory")->required();
    evaluate->add_option("--baseline", baseline, "Baseline accuracy, or a summary.json from another run");
    evaluate->add_option("--judge", judge_spec, "Judge backend spec (substring fallback when absent)");
    evaluate->add_option("--classifier", classifier_spec, "Error classifier backend spec");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "Shapley contributions from a module ablation grid");
    std::string grid_path, column;
    ablate->add_option("--grid", grid_path, "Grid CSV")->required()->check(CLI::ExistingFile);
    ablate->add_option("--out", out_path, "Write the Shapley CSV here");
    ablate->add_option("--column", column, "Print only this column");

    // sweep-tau
    auto* sweep = app.add_subcommand("sweep-tau", "Accuracy as a function of the modality threshold");
    std::string range;
    sweep->add_option("--benchmark", bench_path, "Benchmark JSONL")->required()->check(CLI::ExistingFile);
    sweep->add_option("--range", range, "LO:HI:STEP")->required();
    sweep->add_option("--fixture", fixture, "Serve pages from this fixture");
    sweep->add_option("--modules", modules, "Enabled module subset");
    sweep->add_option("--reasoner", reasoner_spec, "Backend spec for every role");
    sweep->add_option("--judge", judge_spec, "Judge backend spec");
    sweep->add_option("--jobs", jobs, "Concurrent episodes")->check(CLI::Range(1, 256));
    sweep->add_option("--out", out_path, "Write the sweep CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "wayfinder: " << e.what() << "\n";
        err << "run 'wayfinder --help' for usage\n";
        return kExitUsage;
    }

    try {
        GlobalConfig cfg =
            resolve_config(config_path.empty() ? std::nullopt : std::optional<std::string>(config_path));
        if (step_cap) cfg.agent.step_cap = step_cap;

        if (*run) {
            if (root.empty() && fixture.empty()) throw UsageError("run: one of --root or --fixture is required");
            apply_module_flags(cfg.agent, modules, no_vlm, no_stack, no_counter);
            std::shared_ptr<Environment> env;
            std::string start = root;
            if (!fixture.empty()) {
                auto fx = load_named_fixture(fixture);
                if (start.empty()) start = fx->root;
                env = std::make_shared<SimEnvironment>(fx);
            } else {
                env = std::make_shared<LiveEnvironment>(std::make_shared<LiveFetcher>(
                    cfg.fetch, std::make_shared<HttplibTransport>(), std::make_shared<SystemClock>()));
            }
            auto reasoner = make_role_reasoner(cfg.backends, reasoner_spec);
            const auto ep =
                run_episode(query, start, *env, *reasoner, cfg.agent, make_relevance_scorer(cfg.backends));
            const auto trace = episode_to_jsonl(ep);
            if (trace_path.empty()) {
                out << trace;
            } else {
                write_file(trace_path, trace);
                out << "outcome: " << to_string(ep.outcome) << "\n";
                out << "steps: " << ep.steps.size() << "\n";
                out << "answer: " << ep.answer << "\n";
            }
            return kExitOk;
        }

        if (*batch) {
            apply_module_flags(cfg.agent, modules, false, false, false);
            const auto items = read_benchmark_jsonl(bench_path);
            std::shared_ptr<const SiteFixture> fx;
            if (!fixture.empty()) fx = load_named_fixture(fixture);
            EnvironmentFactory factory;
            if (fx) {
                factory = [fx] { return std::make_shared<SimEnvironment>(fx); };
            } else {
                auto fetcher = std::make_shared<LiveFetcher>(cfg.fetch, std::make_shared<HttplibTransport>(),
                                                             std::make_shared<SystemClock>());
                factory = [fetcher] { return std::make_shared<LiveEnvironment>(fetcher); };
            }
            BatchOptions opts{cfg.agent, cfg.backends, reasoner_spec, jobs, traces_dir};
            const auto preds = run_batch(items, fx ? fx->root : "", factory, opts);
            write_file(out_path, predictions_to_jsonl(preds));
            std::size_t answered = 0;
            for (const auto& p : preds) answered += !p.prediction.empty();
            out << "items: " << preds.size() << "\nanswered: " << answered << "\n";
            return kExitOk;
        }

        if (*gen) {
            if (roots_path.empty() && fixture.empty())
                throw UsageError("bench generate: one of --roots or --fixture is required");
            BenchConfig bc = cfg.bench;
            if (seed) bc.seed = *seed;
            if (!date.empty()) bc.date = date;
            if (!quotas.empty()) bc.quotas = parse_quotas(quotas);
            std::vector<RootSpec> roots;
            std::shared_ptr<Environment> env;
            if (!fixture.empty()) {
                auto fx = load_named_fixture(fixture);
                RootSpec r{fx->root, parse_domain(domain), std::nullopt};
                if (!language.empty()) r.language = parse_language(language);
                roots.push_back(r);
                env = std::make_shared<SimEnvironment>(fx);
            } else {
                roots = load_roots(roots_path);
                env = std::make_shared<LiveEnvironment>(std::make_shared<LiveFetcher>(
                    cfg.fetch, std::make_shared<HttplibTransport>(), std::make_shared<SystemClock>()));
            }
            auto generator = role_backend(cfg.backends, generator_spec, "generator");
            if (!generator) generator = make_role_reasoner(cfg.backends);
            auto teacher = role_backend(cfg.backends, teacher_spec, "teacher");
            if (!teacher) teacher = make_role_reasoner(cfg.backends);
            const auto result = generate_benchmark(*env, roots, bc, *generator, *teacher);
            write_file(out_path, benchmark_to_jsonl(result, bc));
            out << "items: " << result.benchmark.items.size() << "\n";
            for (const auto& [cell, n] : result.benchmark.counts)
                out << to_string(cell.first) << "/" << to_string(cell.second) << ": " << n << "\n";
            for (const auto& [cell, n] : result.benchmark.shortfall)
                if (n) out << "shortfall " << to_string(cell.first) << "/" << to_string(cell.second) << ": " << n << "\n";
            return kExitOk;
        }

        if (*evaluate) {
            const auto items = read_benchmark_jsonl(bench_path);
            const auto preds = read_predictions_jsonl(preds_path);
            auto judge_backend = role_backend(cfg.backends, judge_spec, "judge");
            auto classifier = role_backend(cfg.backends, classifier_spec, "classifier");
            if (!classifier) classifier = make_role_reasoner(cfg.backends);
            const auto res = evaluate_all(items, preds, judge_backend.get(), *classifier, cfg.refusal);
            const fs::path dir(report_dir);
            write_file(dir / "records.jsonl", records_to_jsonl(res.records));
            write_file(dir / "by_kind_difficulty.csv", report_table_csv(res.report.by_kind_difficulty, "kind_difficulty"));
            write_file(dir / "by_domain.csv", report_table_csv(res.report.by_domain, "domain"));
            write_file(dir / "by_language.csv", report_table_csv(res.report.by_language, "language"));
            write_file(dir / "summary.json", report_summary_json(res.report, parse_baseline(baseline)));
            out << "accuracy: " << fmt4(res.report.overall.accuracy()) << " (" << res.report.overall.correct << "/"
                << res.report.overall.total << ")\n";
            return kExitOk;
        }

        if (*ablate) {
            const auto grid = read_grid_csv(grid_path);
            if (!column.empty()) {
                const auto r = shapley3(grid, column);
                out << "phi_C " << fmt2(r.phi_C) << "\nphi_S " << fmt2(r.phi_S) << "\nphi_U " << fmt2(r.phi_U)
                    << "\nsum " << fmt2(r.sum()) << "\n";
            } else {
                out << shapley_csv(grid);
            }
            if (!out_path.empty()) write_file(out_path, shapley_csv(grid));
            return kExitOk;
        }

        if (*sweep) {
            const auto r = parse_range(range);
            apply_module_flags(cfg.agent, modules, false, false, false);
            const auto items = read_benchmark_jsonl(bench_path);
            std::shared_ptr<const SiteFixture> fx;
            if (!fixture.empty()) fx = load_named_fixture(fixture);
            auto fetcher = fx ? nullptr
                              : std::make_shared<LiveFetcher>(cfg.fetch, std::make_shared<HttplibTransport>(),
                                                              std::make_shared<SystemClock>());
            EnvironmentFactory factory = [fx, fetcher]() -> std::shared_ptr<Environment> {
                if (fx) return std::make_shared<SimEnvironment>(fx);
                return std::make_shared<LiveEnvironment>(fetcher);
            };
            auto judge_backend = role_backend(cfg.backends, judge_spec, "judge");
            auto classifier = make_role_reasoner(cfg.backends);
            std::string csv = "tau,accuracy,correct,total\n";
            const auto n_steps = static_cast<long>(std::floor((r.hi - r.lo) / r.step + 1e-9));
            for (long k = 0; k <= n_steps; ++k) {
                const double tau = r.lo + static_cast<double>(k) * r.step;
                BatchOptions opts{cfg.agent, cfg.backends, reasoner_spec, jobs, ""};
                opts.agent.score.tau = tau;
                const auto preds = run_batch(items, fx ? fx->root : "", factory, opts);
                const auto res = evaluate_all(items, preds, judge_backend.get(), *classifier, cfg.refusal);
                csv += fmt2(tau) + "," + fmt4(res.report.overall.accuracy()) + "," +
                       std::to_string(res.report.overall.correct) + "," + std::to_string(res.report.overall.total) +
                       "\n";
            }
            out << csv;
            if (!out_path.empty()) write_file(out_path, csv);
            return kExitOk;
        }
    } catch (const UsageError& e) {
        err << "wayfinder: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "wayfinder: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "wayfinder: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace wayfinder
