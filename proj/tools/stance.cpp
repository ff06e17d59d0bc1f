// Command-line entry point: ingest, train, eval, predict-ood, analyze.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stance/analysis.hpp"
#include "stance/corpus.hpp"
#include "stance/ingest.hpp"
#include "stance/label_embeddings.hpp"
#include "stance/labelspace.hpp"
#include "stance/log.hpp"
#include "stance/metrics.hpp"
#include "stance/model.hpp"
#include "stance/ood_mapper.hpp"
#include "stance/synthetic.hpp"
#include "stance/trainer.hpp"

namespace fs = std::filesystem;
using namespace stance;

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

struct Globals {
    std::string data_root;
    std::string registry;
    std::string groups;
    std::string log_level{"info"};
    std::vector<std::string> argv;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size() && !s.empty()) {
        const auto end = std::min(s.find(',', start), s.size());
        if (end > start) {
            out.push_back(s.substr(start, end - start));
        }
        start = end + 1;
    }
    return out;
}

fs::path data_root(const Globals& g) {
    if (!g.data_root.empty()) {
        return g.data_root;
    }
    if (const char* env = std::getenv("STANCE_DATA_ROOT"); env != nullptr && *env != '\0') {
        return env;
    }
    return "data/corpus";
}

// --registry, else <data_root>/registry.jsonl, else the built-in registry.
Registry resolve_registry(const Globals& g) {
    if (!g.registry.empty()) {
        return Registry::from_file(g.registry);
    }
    if (const auto local = data_root(g) / "registry.jsonl"; fs::exists(local)) {
        return Registry::from_file(local);
    }
    return Registry::builtin();
}

// --groups, else <data_root>/label_groups.jsonl, else the shipped table, else the built-in repair.
GroupTable resolve_groups(const Globals& g) {
    if (!g.groups.empty()) {
        return GroupTable::load(g.groups);
    }
    if (const auto local = data_root(g) / "label_groups.jsonl"; fs::exists(local)) {
        return GroupTable::load(local);
    }
#ifdef STANCE_DEFAULT_GROUPS
    if (fs::exists(STANCE_DEFAULT_GROUPS)) {
        return GroupTable::load(STANCE_DEFAULT_GROUPS);
    }
#endif
    return GroupTable::repaired();
}

std::vector<std::string> resolve_datasets(const std::string& list, const Registry& registry) {
    auto names = split_list(list);
    return names.empty() ? registry.names() : names;
}

void write_manifest(const fs::path& dir, const std::string& verb, const Globals& g, io::json resolved) {
    io::json manifest{{"tool", "stance"},
                      {"version", STANCE_VERSION},
                      {"verb", verb},
                      {"argv", g.argv},
                      {"data_root", data_root(g).string()},
                      {"resolved", std::move(resolved)}};
    io::write_json_atomic(dir / "manifest.json", manifest);
}

MoLEModel load_model(const std::string& path) { return MoLEModel::load(best_model_path(path)); }

EvalReport score_predictions(const std::map<std::string, std::vector<std::string>>& preds,
                             const std::map<std::string, std::vector<std::string>>& golds, const Registry& registry,
                             const std::vector<std::string>& labels_override, ReportMetadata meta) {
    std::map<std::string, double> per;
    for (const auto& [dataset, gold] : golds) {
        const auto inventory = labels_override.empty() ? registry.at(dataset).labels : labels_override;
        per[dataset] = macro_f1(preds.at(dataset), gold, inventory);
    }
    return aggregate_report(per, std::move(meta), registry);
}

void emit_report(const fs::path& out, const EvalReport& report) {
    io::write_json_atomic(out / "report.json", report.to_json());
    io::write_text_atomic(out / "report.txt", report.render());
    std::cout << report.render();
}

// ---- ingest --------------------------------------------------------------------------------

struct IngestArgs {
    bool synthetic{false};
    std::size_t synthetic_train{96}, synthetic_dev{24}, synthetic_test{24};
    std::string dataset, split, input, format;
    std::string id_col, target_col, context_col{"context"}, label_col{"label"}, label_map, id_prefix;
    std::vector<std::string> skip_labels;
    bool lowercase_labels{false};
};

int run_ingest(const Globals& g, const IngestArgs& a) {
    const auto root = data_root(g);
    if (a.synthetic) {
        const auto corpus = synthetic::make_corpus({a.synthetic_train, a.synthetic_dev, a.synthetic_test, kDefaultSeed});
        std::vector<DatasetDescriptor> descriptors;
        for (const auto& d : corpus.datasets()) {
            save_dataset(root, d);
            descriptors.push_back(d.descriptor);
        }
        Registry(descriptors).save(root / "registry.jsonl");
        synthetic::group_table().save(root / "label_groups.jsonl");
        save_vectors(root / "label_vectors.txt", synthetic::label_embeddings());
        write_manifest(root, "ingest", g, {{"synthetic", true}, {"datasets", corpus.size()}});
        log::info("wrote " + std::to_string(corpus.size()) + " synthetic datasets to " + root.string());
        return 0;
    }
    if (a.dataset.empty() || a.split.empty() || a.input.empty()) {
        throw InvalidArgument("ingest needs --dataset, --split and --input (or --synthetic)");
    }
    const auto registry = resolve_registry(g);
    const auto& descriptor = registry.at(a.dataset);
    const auto split = parse_split(a.split);
    const auto format = a.format.empty() ? ingest::format_from_extension(a.input) : ingest::parse_format(a.format);
    ingest::Mapping m;
    if (!a.id_col.empty()) m.id_column = a.id_col;
    m.target_columns = split_list(a.target_col);
    m.context_column = a.context_col;
    m.label_columns = split_list(a.label_col);
    m.label_map = ingest::parse_label_map(a.label_map);
    m.lowercase_labels = a.lowercase_labels;
    m.skip_labels = a.skip_labels;
    const auto examples = ingest::convert(ingest::read_rows(a.input, format), descriptor, split, m, a.id_prefix);
    ingest::write_split(root, descriptor, split, examples);
    write_manifest(root / descriptor.name, "ingest", g,
                   {{"dataset", descriptor.name}, {"split", to_string(split)}, {"input", a.input}, {"examples", examples.size()}});
    log::info("wrote " + std::to_string(examples.size()) + " examples to " + split_path(root, descriptor.name, split).string());
    return 0;
}

// ---- train ---------------------------------------------------------------------------------

struct TrainArgs {
    std::string config, held_out, datasets, out{"runs"}, run_id, sampling;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
    bool hard_mapping{false};
};

int run_train(const Globals& g, const TrainArgs& a) {
    TrainConfig cfg;
    cfg.seed = kDefaultSeed;
    if (!a.config.empty()) {
        cfg.apply(io::read_json(a.config));
    }
    for (const auto& o : a.overrides) cfg.apply_override(o);
    if (!a.held_out.empty()) cfg.held_out = a.held_out;
    if (a.seed) cfg.seed = *a.seed;
    if (a.epochs) cfg.epochs = *a.epochs;
    if (!a.sampling.empty()) cfg.sampling = parse_batch_sampling(a.sampling);
    if (a.hard_mapping) cfg.hard_mapping = true;
    if (!a.run_id.empty()) cfg.run_id = a.run_id;
    const auto registry = resolve_registry(g);
    if (!a.datasets.empty() || cfg.datasets.empty()) cfg.datasets = resolve_datasets(a.datasets, registry);
    cfg.data_root = data_root(g).string();
    cfg.checkpoint_dir = a.out;
    cfg.validate();
    if (cfg.held_out && std::find(cfg.datasets.begin(), cfg.datasets.end(), *cfg.held_out) == cfg.datasets.end()) {
        log::warn("held-out dataset '" + *cfg.held_out + "' is not among the training datasets");
    }

    const auto corpus = load_corpus(cfg.data_root, cfg.datasets, registry);
    const fs::path run_dir = fs::path(cfg.checkpoint_dir) / cfg.run_id;
    TrainHooks hooks;
    hooks.on_epoch = [](const EpochReport& r) {
        std::ostringstream msg;
        msg << "epoch " << r.epoch << ": loss " << r.mean_loss.total << ", dev avg F1 " << r.dev_average << " (" << r.seconds
            << " s)";
        log::info(msg.str());
    };
    const auto result = train(corpus, cfg, resolve_groups(g), hooks);
    io::json epochs = io::json::array();
    for (const auto& r : result.epochs) {
        epochs.push_back({{"epoch", r.epoch},
                          {"loss", {{"source", r.mean_loss.source},
                                    {"own_domain", r.mean_loss.own_domain},
                                    {"adversarial", r.mean_loss.adversarial},
                                    {"total", r.mean_loss.total}}},
                          {"dev_scores", r.dev_scores},
                          {"dev_average", r.dev_average},
                          {"seconds", r.seconds}});
    }
    io::write_json_atomic(run_dir / "train_report.json", {{"best_epoch", result.best_epoch}, {"epochs", epochs}});
    auto resolved = cfg.to_json();
    resolved["config_hash"] = cfg.hash();
    write_manifest(run_dir, "train", g, resolved);
    std::cout << "best epoch " << result.best_epoch << " -> " << best_model_path(run_dir).string() << '\n';
    return 0;
}

// ---- eval ----------------------------------------------------------------------------------

struct EvalArgs {
    std::string predictions, gold, model, datasets, labels, baseline, split{"test"}, out{"eval"};
    std::uint64_t seed{kDefaultSeed};
    std::size_t trials{10};
};

int run_eval(const Globals& g, const EvalArgs& a) {
    const auto registry = resolve_registry(g);
    const auto split = parse_split(a.split);
    const auto labels_override = split_list(a.labels);
    std::map<std::string, std::vector<std::string>> preds, golds;
    ReportMetadata meta;
    io::json resolved{{"split", to_string(split)}};

    if (!a.predictions.empty()) {
        if (a.gold.empty()) throw InvalidArgument("--predictions needs --gold");
        const auto predicted = read_prediction_labels(a.predictions);
        std::size_t matched = 0;
        io::for_each_jsonl(a.gold, [&](const io::json& row, std::size_t line) {
            const auto e = example_from_json(row);
            const auto it = predicted.find(e.id);
            if (it == predicted.end()) {
                throw SchemaViolation(a.gold + ":" + std::to_string(line) + ": no prediction for id '" + e.id + "'");
            }
            golds[e.dataset].push_back(e.label);
            preds[e.dataset].push_back(it->second);
            ++matched;
        });
        if (matched != predicted.size()) {
            log::warn(std::to_string(predicted.size() - matched) + " predictions have no gold example");
        }
        meta.description = "predictions " + a.predictions;
        resolved["predictions"] = a.predictions;
        resolved["gold"] = a.gold;
    } else {
        std::optional<MoLEModel> model;
        if (!a.model.empty()) {
            model = load_model(a.model);
        } else if (a.baseline.empty()) {
            throw InvalidArgument("eval needs --predictions/--gold, --model, or --baseline");
        }
        // A model is scored on the datasets it was trained on unless told otherwise.
        const auto names = model && a.datasets.empty() ? model->label_space().datasets()
                                                       : resolve_datasets(a.datasets, registry);
        const auto corpus = load_corpus(data_root(g), names, registry);
        for (const auto& d : corpus.datasets()) {
            const auto examples = d.split(split);
            if (examples.empty()) continue;
            auto& gold = golds[d.name()];
            for (const auto* e : examples) gold.push_back(e->label);
            auto& pred = preds[d.name()];
            if (model) {
                for (const auto* e : examples) pred.push_back(predict_label(*model, *e));
            } else if (a.baseline == "majority") {
                pred = majority_baseline(gold, gold.size(), d.descriptor.labels);
            } else if (a.baseline == "logreg") {
                pred = tfidf_logreg_baseline(d, {}, split);
            } else if (a.baseline != "random") {
                throw InvalidArgument("unknown baseline '" + a.baseline + "' (majority, random, logreg)");
            }
        }
        if (a.baseline == "random") {
            std::map<std::string, double> per;
            for (const auto& [name, gold] : golds) {
                per[name] = random_baseline(gold, registry.at(name).labels, a.seed, a.trials);
            }
            meta.description = "random baseline";
            const auto report = aggregate_report(per, meta, registry);
            fs::create_directories(a.out);
            emit_report(a.out, report);
            resolved["baseline"] = "random";
            resolved["seed"] = a.seed;
            resolved["trials"] = a.trials;
            write_manifest(a.out, "eval", g, resolved);
            return 0;
        }
        meta.description = model ? "model " + a.model : a.baseline + " baseline";
        resolved["model"] = a.model;
        resolved["baseline"] = a.baseline;
        resolved["datasets"] = names;
    }
    const auto report = score_predictions(preds, golds, registry, labels_override, meta);
    emit_report(a.out, report);
    write_manifest(a.out, "eval", g, resolved);
    return 0;
}

// ---- predict-ood ---------------------------------------------------------------------------

struct OODArgs {
    std::string model, held_out, strategy{"weak"}, embeddings, restrict_mask, split{"test"}, out{"ood"};
};

int run_predict_ood(const Globals& g, const OODArgs& a) {
    const auto registry = resolve_registry(g);
    const auto& descriptor = registry.at(a.held_out);
    const auto dataset = load_dataset(data_root(g), descriptor);
    auto model = load_model(a.model);
    const auto kind = parse_mapping_kind(a.strategy);
    OODOptions options{kind, a.restrict_mask.empty() ? std::nullopt : std::optional(a.restrict_mask)};
    if (kind == MappingKind::Hard) {
        for (const auto& l : model.label_space().labels()) {
            (void)parse_hard_group(l.name);  // throws unless the model was trained on meta groups
        }
    }
    std::optional<EmbeddingTable> table;
    std::optional<LabelVectorCache> cache;
    if (kind != MappingKind::Hard) {
        if (a.embeddings.empty()) throw InvalidArgument("--strategy " + a.strategy + " needs --embeddings");
        if (a.embeddings == "model") {
            table = EmbeddingTable::contextual(static_cast<std::size_t>(model.options().encoder.hidden_size),
                                               [&model](std::string_view name) { return model.encode_text(name); });
        } else {
            table = load_vectors(a.embeddings);
        }
        cache.emplace(*table);
    }
    const auto examples = dataset.split(parse_split(a.split));
    const auto groups = resolve_groups(g);
    const auto predictions = predict_ood(model, examples, descriptor, groups, options, cache ? &*cache : nullptr);
    write_predictions(fs::path(a.out) / "predictions.jsonl", predictions);

    std::vector<std::string> pred, gold;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        pred.push_back(predictions[i].mapped_label.name);
        gold.push_back(examples[i]->label);
    }
    ReportMetadata meta{"", a.strategy, a.held_out, "out-of-domain " + a.strategy + " mapping"};
    if (!examples.empty()) {
        emit_report(a.out, aggregate_report({{descriptor.name, macro_f1(pred, gold, descriptor.labels)}}, meta, registry));
    }
    write_manifest(a.out, "predict-ood", g,
                   {{"model", a.model},
                    {"held_out", a.held_out},
                    {"strategy", a.strategy},
                    {"embeddings", a.embeddings},
                    {"restrict_mask", a.restrict_mask},
                    {"split", a.split}});
    return 0;
}

// ---- analyze -------------------------------------------------------------------------------

struct AnalyzeArgs {
    std::string datasets, scores, model, out{"analysis"};
    std::size_t scatter_n{1000};
    std::uint64_t seed{kDefaultSeed};
};

int run_analyze(const Globals& g, const AnalyzeArgs& a) {
    const auto registry = resolve_registry(g);
    const auto names = resolve_datasets(a.datasets, registry);
    const auto corpus = load_corpus(data_root(g), names, registry);
    const fs::path out = a.out;

    io::json stats = io::json::object();
    std::vector<DatasetFeatureVector> features;
    for (const auto& d : corpus.datasets()) {
        const auto sizes = split_stats(d);
        const auto vocab = vocab_stats(d);
        const auto dev = split_overlap(d, Split::Dev);
        const auto test = split_overlap(d, Split::Test);
        stats[d.name()] = {{"train", sizes.train},
                           {"dev", sizes.dev},
                           {"test", sizes.test},
                           {"unique_words", vocab.unique_word_count},
                           {"mean_length", vocab.mean_length},
                           {"median_length", vocab.median_length},
                           {"max_length", vocab.max_length},
                           {"dev_overlap", {{"target", dev.target}, {"context", dev.context}, {"full", dev.full}}},
                           {"test_overlap", {{"target", test.target}, {"context", test.context}, {"full", test.full}}}};
        features.push_back(dataset_features(d));
    }
    io::write_json_atomic(out / "stats.json", stats);
    io::json feature_doc = io::json::object();
    for (const auto& f : features) {
        io::json row = io::json::object();
        for (const auto& [name, value] : f.features) row[name] = value;
        feature_doc[f.dataset] = row;
    }
    io::write_json_atomic(out / "features.json", feature_doc);

    if (corpus.size() >= 2) {
        std::vector<const Dataset*> ptrs;
        for (const auto& d : corpus.datasets()) ptrs.push_back(&d);
        const auto m = overlap_matrix(ptrs);
        io::json rows = io::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            std::vector<double> r(static_cast<std::size_t>(m.cols()));
            for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
            rows.push_back(r);
        }
        io::write_json_atomic(out / "overlap.json", {{"order", names}, {"matrix", rows}});
    }
    if (!a.scores.empty()) {
        const auto report = report_from_json(io::read_json(a.scores));
        std::vector<DatasetFeatureVector> aligned;
        std::vector<double> scores;
        for (const auto& f : features) {
            if (const auto s = report.score(f.dataset)) {
                aligned.push_back(f);
                scores.push_back(*s);
            }
        }
        const auto corr = pearson_correlation(aligned, scores);
        io::json rows = io::json::array();
        for (const auto& c : corr) rows.push_back({{"feature", c.feature}, {"r", c.r ? io::json(*c.r) : io::json(nullptr)}});
        io::write_json_atomic(out / "correlation.json", rows);
        io::write_text_atomic(out / "correlation.svg", correlation_svg(corr));
    }
    if (!a.model.empty()) {
        auto model = load_model(a.model);
        const auto scatter = dataset_scatter_2d(
            corpus, [&model](const StanceExample& e) { return model.encode_text(e.context, e.target); }, a.scatter_n, a.seed);
        io::write_text_atomic(out / "scatter.svg", scatter_svg(scatter));
    }
    write_manifest(out, "analyze", g,
                   {{"datasets", names}, {"scores", a.scores}, {"model", a.model}, {"scatter_n", a.scatter_n}, {"seed", a.seed}});
    std::cout << "analysis written to " << out.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-domain label-adaptive stance detection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", STANCE_VERSION);
    Globals g;
    g.argv.assign(argv, argv + argc);
    app.add_option("--data-root", g.data_root, "Corpus root (default: $STANCE_DATA_ROOT)");
    app.add_option("--registry", g.registry, "Dataset registry (JSON lines)");
    app.add_option("--groups", g.groups, "Hard-group table (JSON lines)");
    app.add_option("--log-level", g.log_level, "debug, info, warn, error or silent")
        ->check(CLI::IsMember({"debug", "info", "warn", "error", "silent"}));

    IngestArgs ia;
    auto* ingest_cmd = app.add_subcommand("ingest", "Convert a raw split file into the unified layout");
    ingest_cmd->add_flag("--synthetic", ia.synthetic, "Write the synthetic suite instead of converting a file");
    ingest_cmd->add_option("--synthetic-train", ia.synthetic_train, "Synthetic training examples per dataset");
    ingest_cmd->add_option("--synthetic-dev", ia.synthetic_dev, "Synthetic dev examples per dataset");
    ingest_cmd->add_option("--synthetic-test", ia.synthetic_test, "Synthetic test examples per dataset");
    ingest_cmd->add_option("--dataset", ia.dataset, "Registry dataset name");
    ingest_cmd->add_option("--split", ia.split, "train, dev or test");
    ingest_cmd->add_option("--input", ia.input, "Raw CSV, TSV or JSON-lines file");
    ingest_cmd->add_option("--format", ia.format, "csv, tsv or jsonl (default: from extension)");
    ingest_cmd->add_option("--id-col", ia.id_col, "Id column (default: row number)");
    ingest_cmd->add_option("--target-col", ia.target_col, "Target column(s), comma separated; empty for none");
    ingest_cmd->add_option("--context-col", ia.context_col, "Context column");
    ingest_cmd->add_option("--label-col", ia.label_col, "Label column(s), comma separated");
    ingest_cmd->add_option("--label-map", ia.label_map, "raw=label,... renames");
    ingest_cmd->add_flag("--lowercase-labels", ia.lowercase_labels, "Lower-case labels after mapping");
    ingest_cmd->add_option("--skip-label", ia.skip_labels, "Drop rows with this (mapped) label");
    ingest_cmd->add_option("--id-prefix", ia.id_prefix, "Prefix for generated ids");

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train the mixture-of-experts model");
    train_cmd->add_option("--config", ta.config, "JSON config file");
    train_cmd->add_option("--set", ta.overrides, "key=value config override (repeatable)");
    train_cmd->add_option("--held-out", ta.held_out, "Dataset excluded from training");
    train_cmd->add_option("--datasets", ta.datasets, "Comma-separated datasets (default: whole registry)");
    train_cmd->add_option("--out", ta.out, "Checkpoint directory");
    train_cmd->add_option("--run-id", ta.run_id, "Run name under the checkpoint directory");
    train_cmd->add_option("--seed", ta.seed, "Random seed");
    train_cmd->add_option("--epochs", ta.epochs, "Training epochs");
    train_cmd->add_option("--sampling", ta.sampling, "uniform or proportional batch sampling");
    train_cmd->add_flag("--hard-mapping", ta.hard_mapping, "Train on meta-group labels");

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Score predictions, a model, or a baseline");
    eval_cmd->add_option("--predictions", ea.predictions, "Prediction JSON lines (id, mapped_label)");
    eval_cmd->add_option("--gold", ea.gold, "Gold examples (unified JSON lines)");
    eval_cmd->add_option("--labels", ea.labels, "Label inventory override, comma separated");
    eval_cmd->add_option("--model", ea.model, "Run directory or model file");
    eval_cmd->add_option("--baseline", ea.baseline, "majority, random or logreg");
    eval_cmd->add_option("--datasets", ea.datasets, "Comma-separated datasets");
    eval_cmd->add_option("--split", ea.split, "Split to score");
    eval_cmd->add_option("--seed", ea.seed, "Seed of the random baseline");
    eval_cmd->add_option("--trials", ea.trials, "Draws of the random baseline");
    eval_cmd->add_option("--out", ea.out, "Report directory");

    OODArgs oa;
    auto* ood_cmd = app.add_subcommand("predict-ood", "Map in-domain predictions onto a held-out dataset");
    ood_cmd->add_option("--model", oa.model, "Run directory or model file")->required();
    ood_cmd->add_option("--held-out", oa.held_out, "Held-out dataset")->required();
    ood_cmd->add_option("--strategy", oa.strategy, "hard, weak or soft")->check(CLI::IsMember({"hard", "weak", "soft"}));
    ood_cmd->add_option("--embeddings", oa.embeddings, "Word-vector file, or 'model' for the encoder");
    ood_cmd->add_option("--restrict-mask", oa.restrict_mask, "Predict within one training dataset's labels");
    ood_cmd->add_option("--split", oa.split, "Split of the held-out dataset");
    ood_cmd->add_option("--out", oa.out, "Output directory");

    AnalyzeArgs aa;
    auto* analyze_cmd = app.add_subcommand("analyze", "Dataset statistics, overlaps, correlations and plots");
    analyze_cmd->add_option("--datasets", aa.datasets, "Comma-separated datasets");
    analyze_cmd->add_option("--scores", aa.scores, "EvalReport JSON for the correlation analysis");
    analyze_cmd->add_option("--model", aa.model, "Model used to embed pairs for the scatter plot");
    analyze_cmd->add_option("--scatter-n", aa.scatter_n, "Pairs sampled for the scatter plot");
    analyze_cmd->add_option("--seed", aa.seed, "Sampling seed");
    analyze_cmd->add_option("--out", aa.out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const std::map<std::string, log::Level> levels{{"debug", log::Level::Debug}, {"info", log::Level::Info},
                                                   {"warn", log::Level::Warning}, {"error", log::Level::Error},
                                                   {"silent", log::Level::Silent}};
    log::set_level(levels.at(g.log_level));
    try {
        if (ingest_cmd->parsed()) return run_ingest(g, ia);
        if (train_cmd->parsed()) return run_train(g, ta);
        if (eval_cmd->parsed()) return run_eval(g, ea);
        if (ood_cmd->parsed()) return run_predict_ood(g, oa);
        if (analyze_cmd->parsed()) return run_analyze(g, aa);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
