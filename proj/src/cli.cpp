#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "auditcalib/behavior.hpp"
#include "auditcalib/error.hpp"
#include "auditcalib/harness.hpp"
#include "auditcalib/ingest.hpp"
#include "auditcalib/report.hpp"
#include "auditcalib/scoring.hpp"
#include "auditcalib/text.hpp"

namespace auditcalib::report {

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_interrupt(int) { g_stop.store(true); }

struct AnalysisFlags {
    std::size_t nbins = calibration::kDefaultBins;
    bool strict_paper_binning = false;
    std::string tie_policy = stats::to_string(stats::TiePolicy::exclude_from_numerator);
    std::string kendall = "tau_b";
    std::vector<std::string> models;
    std::string cache = ingest::default_cache_dir();
    bool offline = true;

    ComparisonConfig config() const {
        ComparisonConfig c;
        if (nbins == 0) throw Error(ErrorCode::config, "nbins", "must be at least 1");
        c.nbins = nbins;
        c.edge_policy = strict_paper_binning ? calibration::EdgePolicy::strict_paper
                                             : calibration::EdgePolicy::inclusive_last;
        c.tie_policy = stats::parse_tie_policy(tie_policy);
        if (kendall == "tau_b") {
            c.kendall = stats::KendallVariant::tau_b;
        } else if (kendall == "tau_a") {
            c.kendall = stats::KendallVariant::tau_a;
        } else {
            throw Error(ErrorCode::config, "kendall", "expected tau_b or tau_a");
        }
        return c;
    }
};

void add_analysis_flags(CLI::App* cmd, AnalysisFlags& f) {
    cmd->add_option("--nbins", f.nbins, "Calibration bins")->capture_default_str();
    cmd->add_flag("--strict-paper-binning", f.strict_paper_binning,
                  "Half-open final bin: confidence 1.0 falls in no bin");
    cmd->add_option("--tie-policy", f.tie_policy, "Concordance ties: exclude_from_numerator or drop_pairs")
        ->capture_default_str();
    cmd->add_option("--kendall", f.kendall, "tau_b or tau_a")->capture_default_str();
    cmd->add_option("--models", f.models, "The two model ids to compare")->delimiter(',');
    cmd->add_option("--cache", f.cache, "Article cache directory")->capture_default_str();
    cmd->add_flag("--offline,!--online", f.offline, "Never touch the network (default on)");
}

// Memoized article lookup over the cache.
harness::DocumentSource memo_documents(const std::string& cache_dir, bool offline) {
    auto source = harness::cache_document_source(cache_dir, offline);
    auto memo = std::make_shared<std::map<std::string, ingest::Document>>();
    return [source, memo](const std::string& pmcid) {
        auto it = memo->find(pmcid);
        if (it == memo->end()) it = memo->emplace(pmcid, source(pmcid)).first;
        return it->second;
    };
}

std::vector<std::string> read_id_list(const std::string& path) {
    std::istringstream in(text::read_file(path));
    std::vector<std::string> ids;
    for (std::string line; std::getline(in, line);) {
        const auto t = text::trim(line);
        if (!t.empty() && t.front() != '#') ids.emplace_back(t);
    }
    if (ids.empty()) throw Error(ErrorCode::empty_input, path, "no identifiers listed");
    return ids;
}

void write_text(const std::filesystem::path& path, std::string_view content) {
    ingest::write_file_atomic(path.string(), content);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::io, dir, ec.message());
}

// --- fetch ---------------------------------------------------------------

struct FetchFlags {
    std::string ids;
    std::string cache = ingest::default_cache_dir();
    bool offline = false;
    std::string base_url;
};

int do_fetch(const FetchFlags& f) {
    ingest::FetchOptions options;
    options.offline = f.offline;
    if (!f.base_url.empty()) options.base_url = f.base_url;
    ingest::Fetcher fetcher(f.cache, options);
    const auto ids = read_id_list(f.ids);
    std::map<std::string, std::string> failures;
    const auto got = fetcher.fetch_all(ids, &failures);
    std::cout << "fetched " << got.size() << " of " << ids.size() << " articles into " << f.cache << " ("
              << fetcher.network_requests() << " network requests)\n";
    for (const auto& [id, why] : failures) std::cerr << "fetch failed: " << id << ": " << why << '\n';
    return failures.empty() ? 0 : 3;
}

// --- run -----------------------------------------------------------------

struct RunFlags {
    std::string annotations;
    std::vector<std::string> models;
    std::vector<std::string> prompts;
    std::string adapter = "mock";
    std::string adapter_command;
    std::string out;
    std::string cache = ingest::default_cache_dir();
    bool offline = true;
    std::size_t workers = 1;
    long timeout_ms = 120000;
    bool resume = false;
};

// Records from an interrupted invocation. A trailing partial line is dropped.
RecordTable read_journal(const std::string& path) {
    std::string content = text::read_file(path);
    const auto cut = content.rfind('\n');
    content.resize(cut == std::string::npos ? 0 : cut + 1);
    if (content.empty()) return {};
    return ingest::records_from_csv(content, path);
}

int do_run(const RunFlags& f) {
    const auto annotations = ingest::load_annotations(f.annotations);
    std::vector<PromptStrategy> strategies;
    if (f.prompts.empty()) {
        strategies.assign(kAllStrategies.begin(), kAllStrategies.end());
    } else {
        for (const auto& p : f.prompts) strategies.push_back(parse_strategy(p));
    }
    const auto plan = harness::plan_runs(annotations.annotations, f.models, strategies);

    harness::AdapterContract adapter;
    if (f.adapter == "mock") {
        adapter = harness::make_mock_adapter();
    } else if (f.adapter == "command") {
        if (f.adapter_command.empty()) throw Error(ErrorCode::config, "adapter-command", "required with --adapter command");
        adapter = harness::make_command_adapter(f.adapter_command, std::chrono::milliseconds(f.timeout_ms));
    } else {
        throw Error(ErrorCode::config, "adapter", "expected mock or command");
    }

    const std::string journal_path = f.out + ".journal";
    RecordTable resume;
    if (f.resume) {
        if (std::filesystem::exists(f.out)) resume = ingest::read_records(f.out);
        if (std::filesystem::exists(journal_path)) {
            auto journaled = read_journal(journal_path);
            for (auto& r : journaled.records()) {
                if (!resume.contains(r.key)) resume.insert(std::move(r));
            }
        }
    }

    std::ofstream journal(journal_path, std::ios::binary | std::ios::trunc);
    if (!journal) throw Error(ErrorCode::io, journal_path, "cannot open journal");
    journal << ingest::records_csv_header();
    for (const auto& r : resume.records()) journal << ingest::record_to_csv_line(r);
    journal.flush();

    harness::ExecuteOptions options;
    options.workers = f.workers;
    options.resume_from = f.resume ? &resume : nullptr;
    options.stop = &g_stop;
    options.on_record = [&journal](const EvaluationRecord& r) {
        journal << ingest::record_to_csv_line(r);
        journal.flush();
    };

    g_stop.store(false);
    const auto previous = std::signal(SIGINT, on_interrupt);
    harness::ExecuteResult result;
    try {
        result = harness::execute(plan, adapter, memo_documents(f.cache, f.offline), options);
    } catch (...) {
        std::signal(SIGINT, previous);
        throw;
    }
    std::signal(SIGINT, previous);
    journal.close();

    if (result.interrupted) {
        std::cerr << "interrupted after " << result.adapter_calls << " new records; journal kept at " << journal_path
                  << "; rerun with --resume\n";
        return 3;
    }
    ingest::write_records(result.table, f.out);
    std::filesystem::remove(journal_path);

    std::map<RecordStatus, std::size_t> by_status;
    for (const auto& r : result.table.records()) ++by_status[r.status];
    std::cout << "planned " << plan.entries.size() << " records (" << annotations.unique_pairs << " pairs x "
              << plan.by_model.size() << " models x " << plan.by_strategy.size() << " prompts); adapter "
              << adapter.name << "; " << result.adapter_calls << " calls, " << result.carried_over
              << " carried over\n";
    for (const auto& [s, n] : by_status) std::cout << "  " << to_string(s) << ": " << n << '\n';
    std::cout << "wrote " << f.out << '\n';
    return 0;
}

// --- score ---------------------------------------------------------------

struct ScoreFlags {
    std::string records;
    std::string truth;
    double threshold = scoring::kDefaultThreshold;
    std::string similarity = "lexical";
    std::string similarity_command;
    long timeout_ms = 30000;
    std::string lexicon;
    std::string not_found;
    std::string weights;
    std::string cache = ingest::default_cache_dir();
    bool offline = true;
    std::string out;
};

scoring::ItemLexicon lexicon_from(const std::string& path) {
    return path.empty() ? scoring::ItemLexicon::builtin() : scoring::ItemLexicon::load(path);
}

int do_score(const ScoreFlags& f) {
    auto table = ingest::read_records(f.records);
    const auto truth = ingest::load_annotations(f.truth);
    const auto lexicon = lexicon_from(f.lexicon);

    scoring::ScoringConfig config;
    config.lexicon = &lexicon;
    config.threshold = f.threshold;
    if (!f.not_found.empty()) config.not_found_phrases = scoring::parse_phrase_list(text::read_file(f.not_found));
    if (!f.weights.empty()) config.weights = scoring::parse_weights(f.weights);
    scoring::validate_weights(config.weights);
    if (f.similarity == "lexical") {
        config.backend = scoring::lexical_backend();
    } else if (f.similarity == "external-command") {
        if (f.similarity_command.empty()) {
            throw Error(ErrorCode::config, "similarity-command", "required with --similarity external-command");
        }
        config.backend = scoring::external_backend(f.similarity_command, std::chrono::milliseconds(f.timeout_ms));
    } else {
        throw Error(ErrorCode::config, "similarity", "expected lexical or external-command");
    }

    const auto summary = scoring::score_records(table, truth.annotations, memo_documents(f.cache, f.offline), config);
    const auto out = f.out.empty() ? f.records : f.out;
    ingest::write_records(table, out);
    std::cout << "threshold " << config.threshold << "; similarity " << config.backend.backend_id << "; weights "
              << config.weights.confidence << "," << config.weights.strength << "," << config.weights.sentences << '\n'
              << "scored " << summary.scored << ", not ok " << summary.skipped_status << ", without truth "
              << summary.missing_truth << "\nwrote " << out << '\n';
    return 0;
}

// --- analyze -------------------------------------------------------------

struct AnalyzeFlags {
    std::string records;
    AnalysisFlags analysis;
    std::string behavior_config;
    std::string lexicon;
    std::string out_dir = "analysis";
    std::size_t samples = 10;
};

std::string group_summary_csv(const Aggregation& agg) {
    std::ostringstream out;
    out << "model_id,prompt_strategy,consort_item,n,excluded";
    const char* metrics[] = {"confidence", "uncertainty", "keyword_reliance", "alternative_interpretations",
                             "f1",         "reasoning_score", "compliance_score"};
    for (const auto* m : metrics) out << ",mean_" << m << ",sd_" << m;
    for (const auto l : behavior::kAllLabels) out << ",n_" << behavior::to_string(l);
    out << '\n';
    auto num = [](const std::optional<double>& v) { return v ? text::format_g17(*v) : std::string(); };
    for (const auto& g : agg.groups) {
        out << text::csv_quote(g.value(GroupKey::model_id)) << ',' << g.value(GroupKey::prompt_strategy) << ','
            << text::csv_quote(g.value(GroupKey::consort_item)) << ',' << g.n << ',' << g.excluded;
        for (const auto* m : {&g.confidence, &g.uncertainty, &g.keyword_reliance, &g.alternative_interpretations,
                              &g.f1, &g.reasoning_score, &g.compliance_score}) {
            out << ',' << num(m->mean) << ',' << num(m->sd);
        }
        for (const auto l : behavior::kAllLabels) {
            const auto it = g.label_counts.find(l);
            out << ',' << (it == g.label_counts.end() ? 0 : it->second);
        }
        out << '\n';
    }
    return out.str();
}

std::string key_cells(const RecordKey& k) {
    return text::csv_quote(k.pmcid) + "," + text::csv_quote(k.consort_item) + "," + text::csv_quote(k.model_id) +
           "," + std::string(to_string(k.strategy));
}

int do_analyze(const AnalyzeFlags& f) {
    const auto cfg = f.analysis.config();
    const auto records_bytes = text::read_file(f.records);
    const auto table = ingest::records_from_csv(records_bytes, f.records);
    const auto behavior_cfg =
        f.behavior_config.empty() ? behavior::BehaviorConfig::builtin() : behavior::BehaviorConfig::load(f.behavior_config);
    const auto lexicon = lexicon_from(f.lexicon);
    ensure_dir(f.out_dir);
    const std::filesystem::path dir(f.out_dir);

    const auto [model_a, model_b] = comparison_models(table, f.analysis.models);
    const auto comparison = build_comparison(table, model_a, model_b, cfg);
    auto doc = to_json(comparison);
    doc["inputs"] = {{"records_sha256", text::sha256_hex(records_bytes)},
                     {"records", table.size()},
                     {"behavior_config_sha256", behavior_cfg.hash()},
                     {"lexicon_sha256", lexicon.hash()}};
    write_text(dir / "comparison.json", doc.dump(2) + "\n");

    std::string bins;
    for (const auto* side : {&comparison.a, &comparison.b}) {
        std::istringstream rows(calibration::to_rows(side->calibration));
        std::string line;
        std::getline(rows, line);
        if (bins.empty()) bins = "model_id," + line + "\n";
        while (std::getline(rows, line)) bins += text::csv_quote(side->sample.model_id) + "," + line + "\n";
    }
    write_text(dir / "calibration_bins.csv", bins);

    const auto documents = memo_documents(f.analysis.cache, f.analysis.offline);
    LabelMap labels;
    std::string pivots = "pmcid,consort_item,model_id,prompt_strategy,char_offset,byte_offset,kind,excerpt\n";
    for (const auto& r : table.records()) {
        if (!r.ok()) continue;
        labels[r.key] = behavior::classify_behavior(r, documents(r.key.pmcid), lexicon, behavior_cfg);
        for (const auto& p : behavior::detect_pivots(r.response->reasoning, behavior_cfg)) {
            pivots += key_cells(r.key) + "," + std::to_string(p.char_offset) + "," + std::to_string(p.byte_offset) +
                      "," + std::string(behavior::to_string(p.kind)) + "," + text::csv_quote(p.excerpt) + "\n";
        }
    }
    write_text(dir / "behavior_labels.csv", labels_to_csv(labels));
    write_text(dir / "pivots.csv", pivots);

    std::string meta = "rank,pmcid,consort_item,model_id,prompt_strategy,trigger,uncertainty,"
                       "alternative_interpretations,excerpt\n";
    if (f.samples > 0) {
        std::size_t rank = 1;
        for (const auto& s : behavior::sample_metacognition(table, f.samples, behavior_cfg)) {
            meta += std::to_string(rank++) + "," + key_cells(s.key) + "," + std::string(behavior::to_string(s.trigger)) +
                    "," + text::format_g17(s.uncertainty) + "," + std::to_string(s.alternative_interpretations) + "," +
                    text::csv_quote(s.excerpt) + "\n";
        }
    }
    write_text(dir / "metacognition.csv", meta);

    const GroupKey keys[] = {GroupKey::model_id, GroupKey::prompt_strategy, GroupKey::consort_item};
    write_text(dir / "group_summary.csv", group_summary_csv(aggregate(table, keys, &labels)));

    std::cout << "compared " << model_a << " (n=" << comparison.a.sample.f1.size() << ") with " << model_b
              << " (n=" << comparison.b.sample.f1.size() << "); " << labels.size() << " records classified\n"
              << "wrote " << f.out_dir << '\n';
    return 0;
}

// --- report --------------------------------------------------------------

struct ReportFlags {
    std::string records;
    std::string out_dir;
    std::string labels;
    AnalysisFlags analysis;
};

int do_report(const ReportFlags& f) {
    const auto cfg = f.analysis.config();
    const auto table = ingest::read_records(f.records);
    ensure_dir(f.out_dir);
    const std::filesystem::path dir(f.out_dir);

    std::optional<LabelMap> labels;
    if (!f.labels.empty()) labels = labels_from_csv(text::read_file(f.labels), f.labels);

    const auto [model_a, model_b] = comparison_models(table, f.analysis.models);
    const auto comparison = build_comparison(table, model_a, model_b, cfg);
    write_text(dir / "comparison_table.txt", render_comparison_table(comparison));
    write_text(dir / "behavior_table.txt", render_behavior_table(table, labels ? &*labels : nullptr));
    const auto manifest = emit_figure_data(table, comparison, f.out_dir);

    std::cout << "wrote behavior_table.txt, comparison_table.txt and " << manifest.size() << " figure series to " << f.out_dir << '\n';
    for (const auto& m : manifest) std::cout << "  " << m.file << ": " << m.rows << " rows\n";
    return 0;
}

int exit_code(const Error& e) {
    if (e.is_io()) return 3;
    if (e.code() == ErrorCode::config) return 1;
    return 2;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Confidence calibration and behavior analysis for checklist-audit model outputs", "auditcalib"};
    app.set_config("--config", "", "TOML/INI file mirroring the flags; flags override it");
    app.require_subcommand(1);

    FetchFlags fetch;
    auto* c_fetch = app.add_subcommand("fetch", "Fill the article cache from a list of PMCIDs");
    c_fetch->add_option("--ids", fetch.ids, "File with one PMCID per line")->required();
    c_fetch->add_option("--cache", fetch.cache, "Cache directory")->capture_default_str();
    c_fetch->add_flag("--offline", fetch.offline, "Only check the cache");
    c_fetch->add_option("--base-url", fetch.base_url, "E-utilities host");

    RunFlags run;
    auto* c_run = app.add_subcommand("run", "Plan and execute audits through a model adapter");
    c_run->add_option("--annotations", run.annotations, "Ground-truth table (pmcid,consort_item,sentence)")->required();
    c_run->add_option("--models", run.models, "Comma-separated model ids")->delimiter(',')->required();
    c_run->add_option("--prompts", run.prompts, "Comma-separated strategies (default all)")->delimiter(',');
    c_run->add_option("--adapter", run.adapter, "mock or command")->capture_default_str();
    c_run->add_option("--adapter-command", run.adapter_command, "Shell command for --adapter command");
    c_run->add_option("--out", run.out, "Record table to write")->required();
    c_run->add_option("--cache", run.cache, "Article cache directory")->capture_default_str();
    c_run->add_flag("--offline,!--online", run.offline, "Never touch the network (default on)");
    c_run->add_option("--workers", run.workers, "Concurrent adapter calls")->capture_default_str();
    c_run->add_option("--timeout-ms", run.timeout_ms, "Per-call adapter timeout")->capture_default_str();
    c_run->add_flag("--resume", run.resume, "Carry over records from --out and its journal");

    ScoreFlags score;
    auto* c_score = app.add_subcommand("score", "Fill F1, reasoning and compliance scores");
    c_score->add_option("--records", score.records, "Record table")->required();
    c_score->add_option("--truth", score.truth, "Ground-truth table")->required();
    c_score->add_option("--threshold", score.threshold, "Similarity threshold in (0, 1]")->capture_default_str();
    c_score->add_option("--similarity", score.similarity, "lexical or external-command")->capture_default_str();
    c_score->add_option("--similarity-command", score.similarity_command, "Line-protocol similarity process");
    c_score->add_option("--timeout-ms", score.timeout_ms, "Per-pair similarity timeout")->capture_default_str();
    c_score->add_option("--lexicon", score.lexicon, "Item key-term table (item_code,term)");
    c_score->add_option("--not-found-phrases", score.not_found, "Marker phrase list");
    c_score->add_option("--weights", score.weights, "Compliance weights w1,w2,w3");
    c_score->add_option("--cache", score.cache, "Article cache directory")->capture_default_str();
    c_score->add_flag("--offline,!--online", score.offline, "Never touch the network (default on)");
    c_score->add_option("--out", score.out, "Output table (default: overwrite --records)");

    AnalyzeFlags analyze;
    auto* c_analyze = app.add_subcommand("analyze", "Calibration, statistics and behavior analysis");
    c_analyze->add_option("--records", analyze.records, "Scored record table")->required();
    add_analysis_flags(c_analyze, analyze.analysis);
    c_analyze->add_option("--behavior-config", analyze.behavior_config, "Behavior thresholds and phrase tables (JSON)");
    c_analyze->add_option("--lexicon", analyze.lexicon, "Item key-term table");
    c_analyze->add_option("--out-dir", analyze.out_dir, "Output directory")->capture_default_str();
    c_analyze->add_option("--samples", analyze.samples, "Metacognitive samples to keep")->capture_default_str();

    ReportFlags rep;
    auto* c_report = app.add_subcommand("report", "Tables and figure data series");
    c_report->add_option("--records", rep.records, "Scored record table")->required();
    c_report->add_option("--out-dir", rep.out_dir, "Output directory")->required();
    c_report->add_option("--labels", rep.labels, "behavior_labels.csv from analyze");
    add_analysis_flags(c_report, rep.analysis);

    if (argc <= 1) {
        std::cerr << app.help();
        return 1;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\nRun with --help for the list of options.\n";
        return 1;
    }

    try {
        if (c_fetch->parsed()) return do_fetch(fetch);
        if (c_run->parsed()) return do_run(run);
        if (c_score->parsed()) return do_score(score);
        if (c_analyze->parsed()) return do_analyze(analyze);
        if (c_report->parsed()) return do_report(rep);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

}  // namespace auditcalib::report
