#include <sstream>

#include <nlohmann/json.hpp>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stagefix/cli.hpp"
#include "stagefix/contextscan.hpp"
#include "stagefix/corpus.hpp"
#include "stagefix/eval.hpp"
#include "stagefix/llm.hpp"
#include "stagefix/pipeline.hpp"
#include "stagefix/retrieval.hpp"
#include "stagefix/stats.hpp"

namespace py = pybind11;
using json = nlohmann::json;
using namespace stagefix;

namespace {

// Chat callable: (role, system, user, temperature, max_tokens, sample_index) -> text
using Complete = std::function<std::string(const std::string&, const std::string&, const std::string&, double, int,
                                           std::size_t)>;

class CallbackBackend : public Backend {
  public:
    explicit CallbackBackend(Complete fn) : fn_(std::move(fn)) {}
    ChatResponse complete(const ChatRequest& r, std::size_t sample_index) override {
        py::gil_scoped_acquire gil;
        return {fn_(to_string(r.agent_role), r.system_instruction, r.user_prompt, r.temperature, r.max_tokens,
                    sample_index),
                std::nullopt, "python"};
    }

  private:
    Complete fn_;
};

BugInstance instance_from(const std::string& text) { return parse_instance(json::parse(text), 0); }

std::vector<BugInstance> corpus_from(const std::vector<std::string>& records) {
    std::vector<BugInstance> out;
    for (const auto& r : records) out.push_back(instance_from(r));
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "stagefix native core";

    py::register_exception<CorpusError>(m, "CorpusError", PyExc_ValueError);
    py::register_exception<EvalError>(m, "EvalError", PyExc_ValueError);
    py::register_exception<RetrievalError>(m, "RetrievalError", PyExc_ValueError);
    py::register_exception<LlmError>(m, "LlmError", PyExc_RuntimeError);
    py::register_exception<PipelineError>(m, "PipelineError", PyExc_RuntimeError);

    m.def("tokenize", [](const std::string& s) { return tokenize(s).tokens(); });
    m.def("normalize_whitespace", &normalize_whitespace);

    m.def("exact_match", &exact_match, py::arg("candidate"), py::arg("ground_truth"));
    m.def("fix_at_k", &fix_at_k, py::arg("samples"), py::arg("ground_truths"), py::arg("k"));
    m.def("levenshtein_tokens",
          py::overload_cast<const std::string&, const std::string&>(&levenshtein_tokens), py::arg("candidate"),
          py::arg("ground_truth"));
    m.def("classify_bug_type",
          [](const std::string& a, const std::string& b) { return std::string(to_string(classify_bug_type(a, b))); },
          py::arg("buggy_hunk"), py::arg("fixed_hunk"));
    m.def("format_percent", &format_percent);
    m.def(
        "paired_t_test",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            const auto r = paired_t_test(a, b);
            return py::make_tuple(r.t_statistic, r.p_value, r.degenerate);
        },
        "Returns (t, p, degenerate).");

    // Corpus records cross the boundary as JSON text.
    m.def("parse_corpus", [](const std::string& jsonl) { return dump_corpus(parse_corpus(jsonl)); });
    m.def("instance_bug_type",
          [](const std::string& record) { return std::string(to_string(instance_bug_type(instance_from(record)))); });

    m.def(
        "retrieve",
        [](const std::vector<std::string>& train, const std::string& target) {
            const DemonstrationPool pool(corpus_from(train));
            return json(pool.retrieve(instance_from(target))).dump();
        },
        py::arg("train_records"), py::arg("target_record"));
    m.def("bm25_scores", [](const std::vector<std::string>& train, const std::string& facet, const std::string& query) {
        const auto index = Bm25Index::build(corpus_from(train), facet_from_string(facet));
        std::vector<double> out;
        for (const auto& d : index.docs()) out.push_back(index.score(tokenize(query), d.id));
        return out;
    });

    m.def(
        "extract_context",
        [](const std::string& root, const std::string& buggy_method) -> py::object {
            const auto scan = scan_source_tree(root);
            const auto at = locate_method(scan, buggy_method);
            if (at == std::string::npos) return py::none();
            const RepoIndex repo(scan.units);
            return py::str(json(extract_context(scan.units[at], buggy_method, repo)).dump());
        },
        py::arg("source_root"), py::arg("buggy_method"));

    m.def(
        "run_pipeline",
        [](const std::string& record, const std::string& demos, Complete complete, int max_iter, double temperature,
           std::size_t sample_index) {
            CallbackBackend backend(std::move(complete));
            PipelineConfig cfg;
            cfg.max_iter_num = max_iter;
            const auto d = json::parse(demos).get<std::vector<Demonstration>>();
            const auto inst = instance_from(record);
            py::gil_scoped_release release;
            return json(run_pipeline(inst, d, backend, cfg, Sampling{temperature, sample_index})).dump();
        },
        py::arg("record"), py::arg("demonstrations"), py::arg("complete"), py::arg("max_iter") = 3,
        py::arg("temperature") = 0.0, py::arg("sample_index") = 0);

    m.def(
        "evaluate",
        [](const std::vector<std::string>& corpus, const std::map<std::string, ModelCandidates>& models,
           const std::vector<std::size_t>& k_values) {
            return report_to_json(evaluate(corpus_from(corpus), models, MetricConfig{k_values})).dump();
        },
        py::arg("corpus_records"), py::arg("models"), py::arg("k_values") = std::vector<std::size_t>{1, 3, 5});
    m.def("render_report", [](const std::string& report, const std::string& format) {
        const auto r = report_from_json(json::parse(report));
        if (format == "json") return render_report(r, ReportFormat::Json);
        if (format == "markdown") return render_report(r, ReportFormat::Markdown);
        throw py::value_error("format must be 'json' or 'markdown'");
    });

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "stagefix");
            std::ostringstream out, err;
            int status;
            {
                py::gil_scoped_release release;
                status = cli::run(args, out, err);
            }
            return py::make_tuple(status, out.str(), err.str());
        },
        "Runs a stagefix subcommand; returns (status, stdout, stderr).");
}
