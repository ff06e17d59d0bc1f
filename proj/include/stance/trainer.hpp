#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "autograd.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "io.hpp"
#include "labelspace.hpp"
#include "log.hpp"
#include "metrics.hpp"
#include "model.hpp"

namespace stance {

enum class BatchSampling { Uniform, Proportional };

inline std::string_view to_string(BatchSampling s) { return s == BatchSampling::Uniform ? "uniform" : "proportional"; }
inline BatchSampling parse_batch_sampling(std::string_view s) {
    if (s == "uniform") return BatchSampling::Uniform;
    if (s == "proportional") return BatchSampling::Proportional;
    throw InvalidArgument("unknown batch sampling '" + std::string(s) + "'");
}

struct TrainConfig {
    double lambda{0.5};
    double gamma{0.01};
    int epochs{5};
    int batch_size{64};
    double learning_rate{1e-5};
    double warmup_fraction{0.06};
    double weight_decay{1e-8};
    double beta1{0.9};
    double beta2{0.999};
    double epsilon{1e-8};
    /// Global gradient-norm clip; 0 disables clipping.
    double max_grad_norm{1.0};
    std::uint64_t seed{42};
    std::optional<std::string> held_out;
    BatchSampling sampling{BatchSampling::Uniform};
    ExpertSet expert_set{ExpertSet::All};
    /// Train on meta-group labels (the hard-mapping variant).
    bool hard_mapping{false};
    EncoderConfig encoder{};
    double init_stddev{0.02};
    int experts{4};
    std::vector<std::string> datasets;
    std::string data_root;
    std::string checkpoint_dir;
    std::string run_id{"run"};

    void validate() const {
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda must lie in [0, 1]");
        if (!(gamma >= 0.0)) throw InvalidArgument("gamma must be non-negative");
        if (epochs < 1) throw InvalidArgument("epochs must be at least 1");
        if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
        if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
        if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) throw InvalidArgument("warmup_fraction must lie in [0, 1]");
        encoder.validate();
    }

    [[nodiscard]] io::json to_json() const {
        return {{"lambda", lambda},
                {"gamma", gamma},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"max_length", encoder.max_length},
                {"learning_rate", learning_rate},
                {"warmup_fraction", warmup_fraction},
                {"weight_decay", weight_decay},
                {"beta1", beta1},
                {"beta2", beta2},
                {"epsilon", epsilon},
                {"max_grad_norm", max_grad_norm},
                {"seed", seed},
                {"held_out", held_out ? io::json(*held_out) : io::json(nullptr)},
                {"sampling", to_string(sampling)},
                {"expert_set", to_string(expert_set)},
                {"hard_mapping", hard_mapping},
                {"encoder_id", encoder.encoder_id},
                {"hidden_size", encoder.hidden_size},
                {"layers", encoder.layers},
                {"heads", encoder.heads},
                {"ffn_size", encoder.ffn_size},
                {"lowercase", encoder.lowercase},
                {"init_stddev", init_stddev},
                {"experts", experts},
                {"datasets", datasets},
                {"data_root", data_root},
                {"checkpoint_dir", checkpoint_dir},
                {"run_id", run_id}};
    }

    /// Applies the keys present in a flat JSON object; unknown keys are rejected.
    void apply(const io::json& j) {
        for (const auto& [key, v] : j.items()) {
            try {
                if (key == "lambda") lambda = v.get<double>();
                else if (key == "gamma") gamma = v.get<double>();
                else if (key == "epochs") epochs = v.get<int>();
                else if (key == "batch_size") batch_size = v.get<int>();
                else if (key == "max_length") encoder.max_length = v.get<int>();
                else if (key == "learning_rate") learning_rate = v.get<double>();
                else if (key == "warmup_fraction") warmup_fraction = v.get<double>();
                else if (key == "weight_decay") weight_decay = v.get<double>();
                else if (key == "beta1") beta1 = v.get<double>();
                else if (key == "beta2") beta2 = v.get<double>();
                else if (key == "epsilon") epsilon = v.get<double>();
                else if (key == "max_grad_norm") max_grad_norm = v.get<double>();
                else if (key == "seed") seed = v.get<std::uint64_t>();
                else if (key == "held_out") held_out = v.is_null() ? std::nullopt : std::optional(v.get<std::string>());
                else if (key == "sampling") sampling = parse_batch_sampling(v.get<std::string>());
                else if (key == "expert_set") expert_set = parse_expert_set(v.get<std::string>());
                else if (key == "hard_mapping") hard_mapping = v.get<bool>();
                else if (key == "encoder_id") encoder.encoder_id = v.get<std::string>();
                else if (key == "hidden_size") encoder.hidden_size = v.get<int>();
                else if (key == "layers") encoder.layers = v.get<int>();
                else if (key == "heads") encoder.heads = v.get<int>();
                else if (key == "ffn_size") encoder.ffn_size = v.get<int>();
                else if (key == "lowercase") encoder.lowercase = v.get<bool>();
                else if (key == "init_stddev") init_stddev = v.get<double>();
                else if (key == "experts") experts = v.get<int>();
                else if (key == "datasets") datasets = v.get<std::vector<std::string>>();
                else if (key == "data_root") data_root = v.get<std::string>();
                else if (key == "checkpoint_dir") checkpoint_dir = v.get<std::string>();
                else if (key == "run_id") run_id = v.get<std::string>();
                else throw InvalidArgument("unknown config key '" + key + "'");
            } catch (const io::json::exception& e) {
                throw InvalidArgument("config key '" + key + "': " + e.what());
            }
        }
    }

    static TrainConfig from_json(const io::json& j) {
        TrainConfig c;
        c.apply(j);
        return c;
    }

    /// Parses "key=value" overrides; values are read as JSON, falling back to a string.
    void apply_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos) {
            throw InvalidArgument("override '" + assignment + "' is not key=value");
        }
        const auto key = assignment.substr(0, eq);
        const auto raw = assignment.substr(eq + 1);
        io::json value;
        try {
            value = io::json::parse(raw);
        } catch (const io::json::parse_error&) {
            value = raw;
        }
        apply(io::json{{key, value}});
    }

    [[nodiscard]] std::string hash() const {
        std::uint64_t h = 1469598103934665603ULL;
        for (char c : to_json().dump()) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        std::ostringstream out;
        out << std::hex << h;
        return out.str();
    }
};

struct LossBreakdown {
    double source{0.0};      // mixture NLL
    double own_domain{0.0};  // own-expert NLL
    double adversarial{0.0};
    double total{0.0};

    static LossBreakdown compose(double source, double own_domain, double adversarial, double lambda, double gamma) {
        return {source, own_domain, adversarial, lambda * source + (1.0 - lambda) * own_domain + gamma * adversarial};
    }
};

struct Batch {
    std::string dataset;
    std::vector<const StanceExample*> examples;
};

/// Shuffles each dataset's examples of `split`, cuts them into batches, and interleaves the
/// batches by repeatedly drawing a dataset (uniformly, or proportionally to its remaining
/// batches) among those with batches left. Every batch holds a single dataset.
inline std::vector<Batch> make_epoch_batches(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed,
                                             BatchSampling sampling = BatchSampling::Uniform, Split split = Split::Train) {
    if (batch_size == 0) {
        throw InvalidArgument("batch_size must be positive");
    }
    std::mt19937_64 rng(seed);
    std::vector<std::vector<Batch>> per_dataset;
    for (const auto& d : corpus.datasets()) {
        auto examples = d.split(split);
        std::shuffle(examples.begin(), examples.end(), rng);
        std::vector<Batch> batches;
        for (std::size_t start = 0; start < examples.size(); start += batch_size) {
            const auto end = std::min(examples.size(), start + batch_size);
            batches.push_back(Batch{d.name(), {examples.begin() + static_cast<std::ptrdiff_t>(start),
                                               examples.begin() + static_cast<std::ptrdiff_t>(end)}});
        }
        per_dataset.push_back(std::move(batches));
    }
    std::vector<std::size_t> next(per_dataset.size(), 0);
    std::vector<Batch> out;
    while (true) {
        std::vector<std::size_t> open;
        std::vector<double> weights;
        for (std::size_t i = 0; i < per_dataset.size(); ++i) {
            if (next[i] < per_dataset[i].size()) {
                open.push_back(i);
                weights.push_back(sampling == BatchSampling::Uniform
                                      ? 1.0
                                      : static_cast<double>(per_dataset[i].size() - next[i]));
            }
        }
        if (open.empty()) {
            break;
        }
        std::discrete_distribution<std::size_t> draw(weights.begin(), weights.end());
        const auto i = open[draw(rng)];
        out.push_back(std::move(per_dataset[i][next[i]++]));
    }
    if (out.empty()) {
        throw InvalidArgument("make_epoch_batches: no examples in the requested split");
    }
    return out;
}

/// Loss terms of one single-dataset batch (means over the batch). With `accumulate`, the
/// gradient of the total loss is added to the model parameters' gradients.
inline LossBreakdown compute_losses(const Batch& batch, MoLEModel& model, const TrainConfig& config, bool accumulate) {
    if (batch.examples.empty()) {
        throw InvalidArgument("compute_losses: empty batch");
    }
    const auto& space = model.label_space();
    const Mask mask = space.mask_for(batch.dataset);
    const std::size_t own = model.domain_of(batch.dataset);
    const auto dataset_class = static_cast<Eigen::Index>(space.dataset_index(batch.dataset));
    const bool adversary = model.adversary_enabled();
    const double gamma = adversary ? config.gamma : 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.examples.size());
    double sum_s = 0.0, sum_t = 0.0, sum_d = 0.0;
    for (const auto* e : batch.examples) {
        if (e->dataset != batch.dataset) {
            throw InvalidArgument("batch mixes datasets '" + batch.dataset + "' and '" + e->dataset + "'");
        }
        std::size_t gold = 0;
        try {
            gold = space.find(e->dataset, e->label).global_index;
        } catch (const InvalidArgument&) {
            throw InvalidArgument("gold label '" + e->label + "' of record '" + e->id + "' is outside the mask of '" +
                                  e->dataset + "'");
        }
        const auto y = static_cast<Eigen::Index>(gold);
        ag::Tape tape;
        auto g = model.forward(tape, model.tokenize(*e), mask, own, adversary);
        std::vector<ag::Var> picks;
        for (auto k : g.mixture) {
            picks.push_back(ag::pick(g.expert_log_probs[k], y));
        }
        picks.push_back(ag::pick(g.global_log_probs, y));
        ag::Var loss_s = ag::scale(ag::log_mean_exp(picks), -1.0);
        ag::Var loss_t = ag::scale(ag::pick(g.expert_log_probs[own], y), -1.0);
        ag::Var total = ag::add(ag::scale(loss_s, config.lambda), ag::scale(loss_t, 1.0 - config.lambda));
        double loss_d_value = 0.0;
        if (g.domain_logits) {
            ag::Var loss_d = ag::cross_entropy(*g.domain_logits, dataset_class);
            loss_d_value = loss_d.scalar();
            total = ag::add(total, ag::scale(loss_d, gamma));
        }
        sum_s += loss_s.scalar();
        sum_t += loss_t.scalar();
        sum_d += loss_d_value;
        if (accumulate) {
            tape.backward(total, inv_n);
        }
    }
    return LossBreakdown::compose(sum_s * inv_n, sum_t * inv_n, sum_d * inv_n, config.lambda, gamma);
}

/// Adam with decoupled weight decay.
class AdamW {
public:
    AdamW(double beta1, double beta2, double epsilon, double weight_decay)
        : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), weight_decay_(weight_decay) {}

    void step(const std::vector<ag::Parameter*>& params, double lr) {
        if (m_.empty()) {
            for (auto* p : params) {
                m_.push_back(ag::Matrix::Zero(p->value.rows(), p->value.cols()));
                v_.push_back(ag::Matrix::Zero(p->value.rows(), p->value.cols()));
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = *params[i];
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
            const ag::Matrix update =
                ((m_[i] / bc1).array() / ((v_[i] / bc2).array().sqrt() + epsilon_)).matrix();
            p.value -= lr * update;
            if (weight_decay_ > 0.0) {
                p.value -= lr * weight_decay_ * p.value;
            }
        }
    }

private:
    double beta1_, beta2_, epsilon_, weight_decay_;
    std::vector<ag::Matrix> m_, v_;
    std::size_t t_{0};
};

/// Linear warm-up followed by linear decay to zero.
inline double linear_schedule(std::size_t step, std::size_t total_steps, std::size_t warmup_steps) {
    if (step < warmup_steps) {
        return static_cast<double>(step) / static_cast<double>(std::max<std::size_t>(1, warmup_steps));
    }
    const double remaining = static_cast<double>(total_steps) - static_cast<double>(step);
    return std::max(0.0, remaining / static_cast<double>(std::max<std::size_t>(1, total_steps - warmup_steps)));
}

inline double clip_gradients(const std::vector<ag::Parameter*>& params, double max_norm) {
    double sq = 0.0;
    for (const auto* p : params) {
        sq += p->grad.squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double factor = max_norm / (norm + 1e-12);
        for (auto* p : params) {
            p->grad *= factor;
        }
    }
    return norm;
}

/// Index of the most probable label under `mask`; ties go to the lower index.
inline std::size_t argmax_label(const Eigen::VectorXd& probs, const Mask& mask) {
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (mask[j] && (!best || probs(static_cast<Eigen::Index>(j)) > probs(static_cast<Eigen::Index>(*best)))) {
            best = j;
        }
    }
    if (!best) {
        throw InvalidArgument("mask has no visible label");
    }
    return *best;
}

/// Predicted label name for an example of a dataset in the model's label space (mixture
/// distribution under that dataset's mask).
inline std::string predict_label(MoLEModel& model, const StanceExample& e) {
    const auto& space = model.label_space();
    const Mask mask = space.mask_for(e.dataset);
    const auto out = model.predict(model.tokenize(e), mask, model.domain_of(e.dataset));
    return space.label(argmax_label(out.combined, mask)).name;
}

/// Macro-F1 per dataset on `split` for every dataset of the corpus that has examples there.
inline std::map<std::string, double> evaluate_split(MoLEModel& model, const Corpus& corpus, Split split) {
    std::map<std::string, double> scores;
    for (const auto& d : corpus.datasets()) {
        const auto examples = d.split(split);
        if (examples.empty()) {
            continue;
        }
        std::vector<std::string> preds, golds;
        for (const auto* e : examples) {
            preds.push_back(predict_label(model, *e));
            golds.push_back(e->label);
        }
        scores[d.name()] = macro_f1(preds, golds, d.descriptor.labels);
    }
    return scores;
}

struct Checkpoint {
    std::vector<ag::Matrix> parameters;
    int epoch{0};
    std::size_t step{0};
    std::map<std::string, double> dev_scores;
    double dev_average{0.0};
};

/// Highest average dev macro-F1; the earliest epoch wins ties.
inline const Checkpoint& select_checkpoint(const std::vector<Checkpoint>& history) {
    if (history.empty()) {
        throw InvalidArgument("select_checkpoint: empty history");
    }
    const Checkpoint* best = &history.front();
    for (const auto& c : history) {
        if (c.dev_average > best->dev_average) {
            best = &c;
        }
    }
    return *best;
}

struct EpochReport {
    int epoch{0};
    LossBreakdown mean_loss;
    std::map<std::string, double> dev_scores;
    double dev_average{0.0};
    double seconds{0.0};
};

struct TrainResult {
    MoLEModel model;
    std::vector<Checkpoint> history;
    std::vector<EpochReport> epochs;
    int best_epoch{0};
    /// Every batch loss in order (for determinism checks and monitoring).
    std::vector<LossBreakdown> step_losses;
};

/// Group table in which every meta-relabelled "dataset__group" label maps to its own group.
inline GroupTable meta_group_table(const std::vector<DatasetDescriptor>& meta_descriptors, const GroupTable& base) {
    GroupTable t;
    for (const auto& [group, neighbors] : base.neighborhoods()) {
        t.set_neighborhood(group, neighbors);
    }
    for (const auto& d : meta_descriptors) {
        for (const auto& l : d.labels) {
            t.assign(qualify(d.name, l), parse_hard_group(l));
        }
    }
    return t;
}

struct TrainHooks {
    std::function<void(const EpochReport&)> on_epoch;
};

/// Full training run: optional leave-one-dataset-out exclusion, optional meta-group relabelling,
/// per-epoch dev evaluation, and restoration of the best epoch's parameters.
inline TrainResult train(const Corpus& full_corpus, const TrainConfig& config, const GroupTable& groups = GroupTable::repaired(),
                         const TrainHooks& hooks = {}) {
    config.validate();
    Corpus corpus = config.held_out ? full_corpus.without(*config.held_out) : full_corpus;
    if (corpus.empty()) {
        throw InvalidArgument("training corpus is empty");
    }
    GroupTable table = groups;
    if (config.hard_mapping) {
        const auto original = build_label_space(corpus.descriptors(), groups);
        corpus = meta_relabel(corpus, original);
        table = meta_group_table(corpus.descriptors(), groups);
    }
    auto space = build_label_space(corpus.descriptors(), table);

    ModelOptions options;
    options.encoder = config.encoder;
    options.experts = config.experts;
    options.init_stddev = config.init_stddev;
    options.expert_set = config.expert_set;
    options.seed = config.seed;
    MoLEModel model(options, Vocabulary::build(corpus, config.encoder.lowercase), std::move(space), corpus.descriptors());
    if (!model.adversary_enabled()) {
        log::info("single training dataset: adversarial term disabled");
    }

    const auto params = model.parameters();
    AdamW optimizer(config.beta1, config.beta2, config.epsilon, config.weight_decay);
    const auto batches_per_epoch =
        make_epoch_batches(corpus, static_cast<std::size_t>(config.batch_size), config.seed, config.sampling).size();
    const std::size_t total_steps = batches_per_epoch * static_cast<std::size_t>(config.epochs);
    const auto warmup_steps = static_cast<std::size_t>(std::ceil(config.warmup_fraction * static_cast<double>(total_steps)));

    std::vector<Checkpoint> history;
    std::vector<EpochReport> reports;
    std::vector<LossBreakdown> step_losses;
    std::size_t step = 0;
    const std::filesystem::path run_dir =
        config.checkpoint_dir.empty() ? std::filesystem::path{} : std::filesystem::path(config.checkpoint_dir) / config.run_id;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const auto batches = make_epoch_batches(corpus, static_cast<std::size_t>(config.batch_size),
                                                config.seed * 1000003ULL + static_cast<std::uint64_t>(epoch), config.sampling);
        LossBreakdown sum{};
        for (const auto& batch : batches) {
            if (config.held_out && batch.dataset == *config.held_out) {
                throw Error("held-out dataset reached a training batch");
            }
            model.zero_grad();
            const auto loss = compute_losses(batch, model, config, true);
            if (!std::isfinite(loss.total)) {
                std::ostringstream msg;
                msg << "non-finite loss at epoch " << epoch << ", step " << step << " (dataset " << batch.dataset
                    << "): source=" << loss.source << " own=" << loss.own_domain << " adversarial=" << loss.adversarial;
                throw Divergence(msg.str());
            }
            clip_gradients(params, config.max_grad_norm);
            optimizer.step(params, config.learning_rate * linear_schedule(step, total_steps, warmup_steps));
            ++step;
            step_losses.push_back(loss);
            sum.source += loss.source;
            sum.own_domain += loss.own_domain;
            sum.adversarial += loss.adversarial;
            sum.total += loss.total;
        }
        const double nb = static_cast<double>(batches.size());
        EpochReport report{epoch, {sum.source / nb, sum.own_domain / nb, sum.adversarial / nb, sum.total / nb}, {}, 0.0, 0.0};
        report.dev_scores = evaluate_split(model, corpus, Split::Dev);
        if (report.dev_scores.empty()) {
            log::warn("no dev examples; checkpoint selection falls back to the first epoch");
        } else {
            double total = 0.0;
            for (const auto& [_, s] : report.dev_scores) {
                total += s;
            }
            report.dev_average = total / static_cast<double>(report.dev_scores.size());
        }
        report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        history.push_back(Checkpoint{model.snapshot(), epoch, step, report.dev_scores, report.dev_average});
        if (!run_dir.empty()) {
            const auto dir = run_dir / ("epoch-" + std::to_string(epoch));
            model.save(dir / "model.json");
            io::json metrics{{"epoch", epoch}, {"step", step}, {"dev_scores", report.dev_scores},
                             {"dev_average", report.dev_average}, {"loss", {{"source", report.mean_loss.source},
                                                                            {"own_domain", report.mean_loss.own_domain},
                                                                            {"adversarial", report.mean_loss.adversarial},
                                                                            {"total", report.mean_loss.total}}}};
            io::write_json_atomic(dir / "metrics.json", metrics);
        }
        if (hooks.on_epoch) {
            hooks.on_epoch(report);
        }
        reports.push_back(std::move(report));
    }
    const auto& best = select_checkpoint(history);
    model.restore(best.parameters);
    if (!run_dir.empty()) {
        io::write_text_atomic(run_dir / "best", "epoch-" + std::to_string(best.epoch) + "\n");
    }
    const int best_epoch = best.epoch;
    return TrainResult{std::move(model), std::move(history), std::move(reports), best_epoch, std::move(step_losses)};
}

/// Resolves `<run_dir>/best` to the selected epoch's model file.
inline std::filesystem::path best_model_path(const std::filesystem::path& run_dir) {
    if (std::filesystem::is_regular_file(run_dir)) {
        return run_dir;
    }
    if (std::filesystem::exists(run_dir / "model.json")) {
        return run_dir / "model.json";
    }
    auto marker = io::read_text(run_dir / "best");
    while (!marker.empty() && (marker.back() == '\n' || marker.back() == '\r' || marker.back() == ' ')) {
        marker.pop_back();
    }
    return run_dir / marker / "model.json";
}

}  // namespace stance
