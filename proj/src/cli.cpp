#include "stagefix/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stagefix/contextscan.hpp"
#include "stagefix/corpus.hpp"
#include "stagefix/eval.hpp"
#include "stagefix/http_backend.hpp"
#include "stagefix/llm.hpp"
#include "stagefix/pipeline.hpp"
#include "stagefix/retrieval.hpp"

namespace stagefix::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kApiKeyEnv = "OPENAI_API_KEY";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Settings {
    std::string corpus;
    std::string train;
    std::string index;
    std::string sources;
    std::string templates;
    std::string backend = "replay";
    std::string endpoint;
    std::string model = "gpt-3.5-turbo-0125";
    std::string transcripts;
    std::string out;
    std::string config;
    std::string report;
    std::string format = "markdown";
    std::vector<std::string> manifests;
    std::vector<std::size_t> k_values;
    std::size_t k = 1;
    int max_iter = 3;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    FilterOptions filter;
    PipelineConfig pipeline;
};

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string sanitize(const std::string& id) {
    std::string s = id;
    for (char& c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                        c == '-' || c == '_';
        if (!ok) c = '_';
    }
    if (s.empty() || s[0] == '.') s.insert(s.begin(), '_');
    return s;
}

std::string run_stem(const std::string& id, std::size_t sample) {
    return sanitize(id) + "__s" + std::to_string(sample);
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

DemonstrationPool load_pool(const Settings& s) {
    auto train = load_corpus(s.train);
    if (s.index.empty()) return DemonstrationPool(std::move(train));
    std::array<Bm25Index, 3> indexes;
    for (std::size_t f = 0; f < kFacetOrder.size(); ++f) {
        const auto path = fs::path(s.index) / (std::string(to_string(kFacetOrder[f])) + ".json");
        indexes[f] = Bm25Index::from_json(json::parse(read_text(path)));
    }
    return DemonstrationPool(std::move(train), std::move(indexes));
}

// ---- ingest ----

int cmd_ingest(const Settings& s, std::ostream& out, std::ostream&) {
    require(s.corpus, "--corpus");
    require(s.out, "--out");
    const auto raw = load_corpus(s.corpus);
    const auto kept = filter_instances(raw, s.filter);
    const auto split = split_repo_disjoint(kept, SplitRatio{}, s.seed);
    const fs::path dir(s.out);
    save_corpus(dir / "train.jsonl", split.train);
    save_corpus(dir / "test.jsonl", split.test);
    write_text(dir / "split.json", split_manifest(split).dump(2) + "\n");
    out << "loaded " << raw.size() << ", kept " << kept.size() << " after filtering\n"
        << "train " << split.train.size() << " (" << split.train_repos.size() << " repos), test "
        << split.test.size() << " (" << split.test_repos.size() << " repos)\n";
    return kOk;
}

// ---- context ----

struct ScannedTree {
    SourceScan scan;
    RepoIndex repo;
};

int cmd_context(const Settings& s, std::ostream& out, std::ostream& err) {
    require(s.corpus, "--corpus");
    require(s.sources, "--sources");
    require(s.out, "--out");
    auto corpus = load_corpus(s.corpus);
    const fs::path root(s.sources);
    std::size_t with_context = 0;
    if (!fs::is_directory(root)) {
        err << "warning: source tree " << root.string() << " not found; no contexts extracted\n";
        for (auto& inst : corpus) inst.context.reset();
    } else {
        std::map<fs::path, std::unique_ptr<ScannedTree>> trees;
        for (auto& inst : corpus) {
            inst.context.reset();
            const fs::path repo_root = fs::is_directory(root / inst.repo) ? root / inst.repo : root;
            auto& tree = trees[repo_root];
            if (!tree) {
                tree = std::make_unique<ScannedTree>();
                tree->scan = scan_source_tree(repo_root);
                for (const auto& [path, msg] : tree->scan.failures) {
                    err << "warning: skipped " << path << ": " << msg << "\n";
                }
                tree->repo = RepoIndex(tree->scan.units);
            }
            const auto at = locate_method(tree->scan, inst.buggy_method);
            if (at == std::string::npos) {
                err << "warning: " << inst.id << ": buggy method not found under " << repo_root.string() << "\n";
                continue;
            }
            try {
                inst.context = extract_context(tree->scan.units[at], inst.buggy_method, tree->repo);
                ++with_context;
            } catch (const std::exception& e) {
                err << "warning: " << inst.id << ": " << e.what() << "\n";
            }
        }
    }
    save_corpus(s.out, corpus);
    out << "context attached to " << with_context << " of " << corpus.size() << " instances\n";
    return kOk;
}

// ---- index / retrieve ----

int cmd_index(const Settings& s, std::ostream& out, std::ostream&) {
    require(s.corpus, "--corpus");
    require(s.out, "--out");
    const auto corpus = load_corpus(s.corpus);
    for (Facet f : kFacetOrder) {
        const auto index = Bm25Index::build(corpus, f);
        write_text(fs::path(s.out) / (std::string(to_string(f)) + ".json"), index.to_json().dump() + "\n");
    }
    out << "indexed " << corpus.size() << " documents x " << kFacetOrder.size() << " facets\n";
    return kOk;
}

int cmd_retrieve(const Settings& s, std::ostream& out, std::ostream&) {
    require(s.corpus, "--corpus");
    require(s.train, "--train");
    const auto targets = load_corpus(s.corpus);
    const auto pool = load_pool(s);
    json result = json::object();
    for (const auto& t : targets) result[t.id] = retrieve_demonstrations(pool, t);
    const auto text = result.dump(2) + "\n";
    if (s.out.empty()) {
        out << text;
    } else {
        write_text(s.out, text);
    }
    return kOk;
}

// ---- run ----

struct Job {
    const BugInstance* instance;
    Sampling sampling;
};

int cmd_run(Settings s, std::ostream& out, std::ostream& err) {
    require(s.corpus, "--corpus");
    require(s.out, "--out");
    if (s.k < 1) throw ConfigError("--k must be >= 1");
    if (s.workers < 1) throw ConfigError("--workers must be >= 1");
    s.pipeline.max_iter_num = s.max_iter;
    s.pipeline.model_name = s.model;
    if (!s.templates.empty()) s.pipeline.templates = PromptTemplates::load(s.templates);
    try {
        s.pipeline.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }

    std::shared_ptr<Backend> shared;
    bool recording = false;
    if (s.backend == "replay") {
        if (s.transcripts.empty() || !fs::is_directory(s.transcripts)) {
            throw ConfigError("replay mode needs an existing --transcripts directory");
        }
        TranscriptStore store;
        store.load_directory(s.transcripts);
        shared = std::make_shared<ReplayBackend>(std::move(store));
    } else if (s.backend == "live" || s.backend == "record") {
        require(s.endpoint, "--endpoint");
        const char* key = std::getenv(kApiKeyEnv);
        if (key == nullptr || *key == '\0') throw ConfigError(std::string(kApiKeyEnv) + " is not set");
        HttpBackendConfig hc;
        hc.endpoint = s.endpoint;
        hc.api_key = key;
        hc.max_in_flight = static_cast<int>(s.workers);
        shared = std::make_shared<HttpBackend>(hc);
        recording = s.backend == "record";
    } else {
        throw ConfigError("unknown backend '" + s.backend + "'");
    }

    const auto targets = load_corpus(s.corpus);
    std::optional<DemonstrationPool> pool;
    if (!s.train.empty()) pool.emplace(load_pool(s));

    std::vector<Job> jobs;
    for (const auto& inst : targets) {
        for (std::size_t j = 0; j < s.k; ++j) {
            const double temp = s.k == 1 ? s.pipeline.temperature_greedy : s.pipeline.temperature_sampling;
            jobs.push_back({&inst, Sampling{temp, j}});
        }
    }

    const fs::path dir(s.out);
    fs::create_directories(dir / "manifests");
    if (recording) fs::create_directories(dir / "transcripts");

    std::vector<RunTranscript> results(jobs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex io;
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const auto& job = jobs[i];
            auto rec = recording ? std::make_shared<RecordingBackend>(shared) : nullptr;
            Backend& backend = rec ? static_cast<Backend&>(*rec) : *shared;
            RunTranscript t;
            try {
                std::vector<Demonstration> demos;
                if (pool) demos = pool->retrieve(*job.instance);
                t = run_pipeline(*job.instance, demos, backend, s.pipeline, job.sampling);
            } catch (const PipelineError& e) {
                t = e.partial();
                t.error = e.what();
            } catch (const std::exception& e) {
                t.instance_id = job.instance->id;
                t.sample_index = job.sampling.sample_index;
                t.temperature = job.sampling.temperature;
                t.error = e.what();
            }
            const auto stem = run_stem(job.instance->id, job.sampling.sample_index);
            try {
                write_text(dir / "manifests" / (stem + ".json"), json(t).dump(2) + "\n");
                if (rec) rec->snapshot().save(dir / "transcripts" / (stem + ".jsonl"));
            } catch (const std::exception& e) {
                t.error = t.error.value_or("") + (t.error ? "; " : "") + e.what();
            }
            const auto n = ++done;
            std::lock_guard lock(io);
            out << "[" << n << "/" << jobs.size() << "] " << job.instance->id << " s" << job.sampling.sample_index
                << ": " << (t.error ? "error" : t.verified ? "verified" : "unverified") << "\n";
            results[i] = std::move(t);
        }
    };
    const std::size_t n_threads = std::min(s.workers, std::max<std::size_t>(jobs.size(), 1));
    {
        std::vector<std::jthread> threads;
        for (std::size_t i = 1; i < n_threads; ++i) threads.emplace_back(worker);
        worker();
    }

    std::size_t verified = 0;
    std::size_t failed = 0;
    for (const auto& t : results) {
        verified += t.verified ? 1 : 0;
        failed += t.error ? 1 : 0;
    }
    out << "runs " << results.size() << ", verified " << verified << ", failed " << failed << "\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].error) {
            err << "failed: " << jobs[i].instance->id << " s" << jobs[i].sampling.sample_index << ": "
                << *results[i].error << "\n";
        }
    }
    return kOk;
}

// ---- eval / report ----

std::pair<std::string, fs::path> parse_manifest_arg(const std::string& arg) {
    std::string name = "stagefix";
    fs::path dir = arg;
    if (const auto eq = arg.find('='); eq != std::string::npos) {
        name = arg.substr(0, eq);
        dir = arg.substr(eq + 1);
    }
    if (fs::is_directory(dir / "manifests")) dir /= "manifests";
    if (name.empty() || !fs::is_directory(dir)) throw ConfigError("bad --manifests entry '" + arg + "'");
    return {name, dir};
}

ModelCandidates load_candidates(const fs::path& dir, const std::vector<BugInstance>& corpus, const std::string& model,
                                std::ostream& err) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::map<std::string, std::vector<std::pair<std::size_t, std::string>>> runs;
    std::set<std::string> seen;
    for (const auto& f : files) {
        RunTranscript t;
        try {
            t = json::parse(read_text(f)).get<RunTranscript>();
        } catch (const std::exception& e) {
            err << "warning: " << model << ": unreadable manifest " << f.string() << ": " << e.what() << "\n";
            continue;
        }
        seen.insert(t.instance_id);
        if (!t.final_patch.empty()) runs[t.instance_id].emplace_back(t.sample_index, t.final_patch);
    }
    ModelCandidates out;
    for (const auto& inst : corpus) {
        if (!seen.count(inst.id)) {
            err << "warning: " << model << ": no manifest for " << inst.id << "; counted unresolved\n";
            continue;
        }
        auto it = runs.find(inst.id);
        if (it == runs.end()) continue;
        std::sort(it->second.begin(), it->second.end());
        auto& list = out[inst.id];
        for (auto& [_, patch] : it->second) list.push_back(patch);
    }
    return out;
}

int cmd_eval(const Settings& s, std::ostream& out, std::ostream& err) {
    require(s.corpus, "--corpus");
    require(s.out, "--out");
    if (s.manifests.empty()) throw ConfigError("--manifests is required");
    MetricConfig mc;
    if (!s.k_values.empty()) mc.k_values = s.k_values;
    try {
        mc.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    const auto corpus = load_corpus(s.corpus);
    std::map<std::string, ModelCandidates> models;
    for (const auto& arg : s.manifests) {
        auto [name, dir] = parse_manifest_arg(arg);
        if (models.count(name)) throw ConfigError("model '" + name + "' given twice");
        models[name] = load_candidates(dir, corpus, name, err);
    }
    const auto report = evaluate(corpus, models, mc);
    const fs::path dir(s.out);
    write_text(dir / "report.json", render_report(report, ReportFormat::Json));
    write_text(dir / "report.md", render_report(report, ReportFormat::Markdown));
    for (const auto& [name, m] : report.models) {
        out << name << ":";
        for (const auto& [k, v] : m.fix_at_k) out << " Fix@" << k << "=" << format_percent(v) << "%";
        out << " lev=" << format_fixed(m.mean_levenshtein, 2) << "\n";
    }
    return kOk;
}

int cmd_report(const Settings& s, std::ostream& out, std::ostream&) {
    require(s.report, "--report");
    ReportFormat format;
    if (s.format == "markdown") {
        format = ReportFormat::Markdown;
    } else if (s.format == "json") {
        format = ReportFormat::Json;
    } else {
        throw ConfigError("unknown --format '" + s.format + "'");
    }
    const auto text = render_report(report_from_json(json::parse(read_text(s.report))), format);
    if (s.out.empty()) {
        out << text;
    } else {
        write_text(s.out, text);
    }
    return kOk;
}

// ---- option wiring ----

void add_corpus(CLI::App* c, Settings& s, const char* help) { c->add_option("--corpus", s.corpus, help); }

void add_train(CLI::App* c, Settings& s) {
    c->add_option("--train", s.train, "Training corpus used as the demonstration pool");
    c->add_option("--index", s.index, "Directory written by `index` over the same training corpus");
}

// Appends config-file values for options the command line left unset, so
// explicit flags always win.
std::vector<std::string> merge_config(const std::vector<std::string>& args, CLI::App& app) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty() || args.size() < 2) return args;
    CLI::App* sub = nullptr;
    try {
        sub = app.get_subcommand(args[1]);
    } catch (const CLI::OptionNotFound&) {
        return args;
    }
    json cfg;
    try {
        cfg = json::parse(read_text(path));
    } catch (const std::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    if (!cfg.is_object()) throw ConfigError("config " + path + ": expected a JSON object");
    std::vector<std::string> merged = args;
    for (const auto& [key, value] : cfg.items()) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        if (sub->get_option_no_throw(flag) == nullptr) continue;
        const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
        if (given) continue;
        auto as_text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        if (value.is_array()) {
            for (const auto& v : value) {
                merged.push_back(flag);
                merged.push_back(as_text(v));
            }
        } else {
            merged.push_back(flag);
            merged.push_back(as_text(value));
        }
    }
    return merged;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Settings s;
    CLI::App app{"Staged multi-agent bug fixing: corpus preparation, retrieval, pipeline runs and evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "stagefix 0.1.0");

    auto* ingest = app.add_subcommand("ingest", "Filter a raw corpus and split it by repository");
    add_corpus(ingest, s, "Raw corpus (JSON Lines)");
    ingest->add_option("--seed", s.seed, "Shuffle seed");
    ingest->add_option("--max-tokens", s.filter.max_tokens, "Longest buggy method kept, in tokens");
    ingest->add_option("--min-commit-tokens", s.filter.min_commit_tokens, "Shortest commit message kept");
    ingest->add_option("--min-confidence", s.filter.min_confidence, "Commit confidence must exceed this");
    ingest->add_option("--out", s.out, "Output directory");

    auto* context = app.add_subcommand("context", "Attach dependence context from a source tree");
    add_corpus(context, s, "Corpus to augment");
    context->add_option("--sources", s.sources, "Source tree, one subdirectory per repo or a single tree");
    context->add_option("--out", s.out, "Augmented corpus file");

    auto* index = app.add_subcommand("index", "Build BM25 indexes for the three retrieval facets");
    add_corpus(index, s, "Training corpus");
    index->add_option("--out", s.out, "Output directory");

    auto* retrieve = app.add_subcommand("retrieve", "Retrieve demonstrations for each target");
    add_corpus(retrieve, s, "Target corpus");
    add_train(retrieve, s);
    retrieve->add_option("--out", s.out, "Output JSON file (default: stdout)");

    auto* runc = app.add_subcommand("run", "Run the pipeline over a corpus");
    add_corpus(runc, s, "Target corpus");
    add_train(runc, s);
    runc->add_option("--templates", s.templates, "Prompt template file");
    runc->add_option("--backend", s.backend, "live, record or replay")
        ->check(CLI::IsMember({"live", "record", "replay"}));
    runc->add_option("--endpoint", s.endpoint, "Chat-completions URL");
    runc->add_option("--model", s.model, "Model name sent to the endpoint");
    runc->add_option("--transcripts", s.transcripts, "Recorded transcripts for replay");
    runc->add_option("--k", s.k, "Runs per instance; 1 is greedy, more are sampled");
    runc->add_option("--max-iter", s.max_iter, "Developer/reviewer rounds after the first review");
    runc->add_option("--seed", s.seed, "Accepted for config symmetry; decoding is seeded by the backend");
    runc->add_option("--workers", s.workers, "Concurrent pipeline runs");
    runc->add_option("--report-max-tokens", s.pipeline.report_max_tokens);
    runc->add_option("--explain-max-tokens", s.pipeline.explain_max_tokens);
    runc->add_option("--pattern-max-tokens", s.pipeline.pattern_max_tokens);
    runc->add_option("--patch-max-tokens", s.pipeline.patch_max_tokens);
    runc->add_option("--review-max-tokens", s.pipeline.review_max_tokens);
    runc->add_option("--temperature-greedy", s.pipeline.temperature_greedy);
    runc->add_option("--temperature-sampling", s.pipeline.temperature_sampling);
    runc->add_option("--out", s.out, "Output directory for manifests (and transcripts when recording)");

    auto* evalc = app.add_subcommand("eval", "Score run manifests against the corpus");
    add_corpus(evalc, s, "Evaluated corpus");
    evalc->add_option("--manifests", s.manifests, "Manifest directory, or NAME=DIR per model");
    evalc->add_option("--k", s.k_values, "k values (default 1 3 5)");
    evalc->add_option("--out", s.out, "Output directory for report.json and report.md");

    auto* report = app.add_subcommand("report", "Render a saved report");
    report->add_option("--report", s.report, "report.json written by eval");
    report->add_option("--format", s.format, "markdown or json");
    report->add_option("--out", s.out, "Output file (default: stdout)");

    for (auto* sub : {ingest, context, index, retrieve, runc, evalc, report}) {
        sub->add_option("--config", s.config, "JSON file of option values; flags override it");
    }

    try {
        const auto merged = merge_config(args, app);
        std::vector<const char*> argv;
        for (const auto& a : merged) argv.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e, out, err);
            return code == 0 ? kOk : kConfigError;
        }
        if (ingest->parsed()) return cmd_ingest(s, out, err);
        if (context->parsed()) return cmd_context(s, out, err);
        if (index->parsed()) return cmd_index(s, out, err);
        if (retrieve->parsed()) return cmd_retrieve(s, out, err);
        if (runc->parsed()) return cmd_run(s, out, err);
        if (evalc->parsed()) return cmd_eval(s, out, err);
        if (report->parsed()) return cmd_report(s, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const TemplateError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    }
    return kConfigError;
}

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace stagefix::cli
