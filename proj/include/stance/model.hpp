#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "autograd.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "io.hpp"
#include "labelspace.hpp"
#include "text.hpp"

namespace stance {

struct EncoderConfig {
    /// Only the built-in "toy" encoder can be instantiated in-process.
    std::string encoder_id{"toy"};
    int hidden_size{32};
    int max_length{100};
    int layers{2};
    int heads{2};
    int ffn_size{64};
    bool lowercase{false};

    void validate() const {
        if (encoder_id != "toy") {
            throw InvalidArgument("encoder '" + encoder_id + "' is not available; only 'toy' can be built in-process");
        }
        if (max_length < 4) {
            throw InvalidArgument("max_length must leave room for three special tokens and one context token");
        }
        if (hidden_size <= 0 || layers < 0 || heads <= 0 || hidden_size % heads != 0 || ffn_size <= 0) {
            throw InvalidArgument("invalid encoder dimensions");
        }
    }
};

inline io::json to_json(const EncoderConfig& c) {
    return {{"encoder_id", c.encoder_id}, {"hidden_size", c.hidden_size}, {"max_length", c.max_length},
            {"layers", c.layers},         {"heads", c.heads},             {"ffn_size", c.ffn_size},
            {"lowercase", c.lowercase}};
}

inline EncoderConfig encoder_config_from_json(const io::json& j) {
    EncoderConfig c;
    c.encoder_id = j.value("encoder_id", c.encoder_id);
    c.hidden_size = j.value("hidden_size", c.hidden_size);
    c.max_length = j.value("max_length", c.max_length);
    c.layers = j.value("layers", c.layers);
    c.heads = j.value("heads", c.heads);
    c.ffn_size = j.value("ffn_size", c.ffn_size);
    c.lowercase = j.value("lowercase", c.lowercase);
    return c;
}

/// Word-level vocabulary of the toy encoder.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;

    Vocabulary() : Vocabulary(std::vector<std::string>{}, false) {}

    Vocabulary(const std::vector<std::string>& words, bool lowercase) : lowercase_(lowercase) {
        for (const char* special : {"[PAD]", "[UNK]", "[CLS]", "[SEP]"}) {
            add(special);
        }
        for (const auto& w : words) {
            add(w);
        }
    }

    /// Collects every token of the training splits (target and context).
    static Vocabulary build(const Corpus& corpus, bool lowercase, std::size_t min_count = 1) {
        std::map<std::string, std::size_t> counts;
        for (const auto& d : corpus.datasets()) {
            for (const auto& e : d.examples) {
                if (e.split != Split::Train) {
                    continue;
                }
                for (const auto* field : {&e.target, &e.context}) {
                    for (auto& tok : text::casual_tokenize(lowercase ? text::to_lower(*field) : *field)) {
                        ++counts[tok];
                    }
                }
            }
        }
        std::vector<std::string> words;
        for (const auto& [w, c] : counts) {
            if (c >= min_count) {
                words.push_back(w);
            }
        }
        return Vocabulary(words, lowercase);
    }

    [[nodiscard]] std::vector<int> encode(std::string_view s) const {
        std::vector<int> ids;
        for (const auto& tok : text::casual_tokenize(lowercase_ ? text::to_lower(s) : std::string(s))) {
            const auto it = index_.find(tok);
            ids.push_back(it == index_.end() ? kUnk : it->second);
        }
        return ids;
    }

    [[nodiscard]] std::size_t size() const { return words_.size(); }
    [[nodiscard]] bool lowercase() const { return lowercase_; }
    /// Words without the four special tokens.
    [[nodiscard]] std::vector<std::string> words() const { return {words_.begin() + 4, words_.end()}; }

private:
    void add(const std::string& w) {
        if (index_.emplace(w, static_cast<int>(words_.size())).second) {
            words_.push_back(w);
        }
    }

    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
    bool lowercase_{false};
};

/// Token ids of "[CLS] context [SEP] target [SEP]" with segment ids 0 (context) and 1 (target).
struct TokenizedPair {
    std::vector<int> ids;
    std::vector<int> segments;
    std::size_t context_tokens{0};
    std::size_t target_tokens{0};
};

/// Shortens the pair one token at a time, always from the currently longer member (the second
/// member on ties), until both fit in `budget` tokens.
inline void truncate_longest_first(std::vector<int>& first, std::vector<int>& second, std::size_t budget) {
    while (first.size() + second.size() > budget) {
        if (first.size() > second.size()) {
            first.pop_back();
        } else {
            second.pop_back();
        }
    }
}

inline TokenizedPair encode_pair(std::string_view context, std::string_view target, const Vocabulary& vocab,
                                 int max_length) {
    if (context.empty()) {
        throw InvalidArgument("cannot encode an example with an empty context");
    }
    if (max_length < 4) {
        throw InvalidArgument("max_length too small");
    }
    auto ctx = vocab.encode(context);
    auto tgt = vocab.encode(target);
    if (ctx.empty()) {
        ctx.push_back(Vocabulary::kUnk);
    }
    truncate_longest_first(ctx, tgt, static_cast<std::size_t>(max_length) - 3);
    TokenizedPair out;
    out.context_tokens = ctx.size();
    out.target_tokens = tgt.size();
    out.ids.push_back(Vocabulary::kCls);
    out.ids.insert(out.ids.end(), ctx.begin(), ctx.end());
    out.ids.push_back(Vocabulary::kSep);
    out.segments.assign(out.ids.size(), 0);
    out.ids.insert(out.ids.end(), tgt.begin(), tgt.end());
    out.ids.push_back(Vocabulary::kSep);
    out.segments.resize(out.ids.size(), 1);
    return out;
}

inline TokenizedPair encode_pair(const StanceExample& e, const Vocabulary& vocab, int max_length) {
    return encode_pair(e.context, e.target, vocab, max_length);
}

/// Pre-norm transformer block: x + MHA(LN(x)), then + FFN(LN(.)).
class TransformerLayer {
public:
    TransformerLayer() = default;

    /// `zero_output` zeroes both output projections so the block starts as an exact identity.
    TransformerLayer(const std::string& prefix, int hidden, int heads, int ffn, std::mt19937_64& rng, double stddev,
                     bool zero_output = false)
        : heads_(heads) {
        const auto d = static_cast<Eigen::Index>(hidden);
        const auto f = static_cast<Eigen::Index>(ffn);
        ln1_g_ = {prefix + ".ln1.gain", ag::Matrix::Ones(1, d)};
        ln1_b_ = {prefix + ".ln1.bias", ag::Matrix::Zero(1, d)};
        wq_ = {prefix + ".attn.wq", ag::normal_matrix(d, d, stddev, rng)};
        wk_ = {prefix + ".attn.wk", ag::normal_matrix(d, d, stddev, rng)};
        wv_ = {prefix + ".attn.wv", ag::normal_matrix(d, d, stddev, rng)};
        bq_ = {prefix + ".attn.bq", ag::Matrix::Zero(1, d)};
        bk_ = {prefix + ".attn.bk", ag::Matrix::Zero(1, d)};
        bv_ = {prefix + ".attn.bv", ag::Matrix::Zero(1, d)};
        wo_ = {prefix + ".attn.wo", zero_output ? ag::Matrix::Zero(d, d) : ag::normal_matrix(d, d, stddev, rng)};
        bo_ = {prefix + ".attn.bo", ag::Matrix::Zero(1, d)};
        ln2_g_ = {prefix + ".ln2.gain", ag::Matrix::Ones(1, d)};
        ln2_b_ = {prefix + ".ln2.bias", ag::Matrix::Zero(1, d)};
        w1_ = {prefix + ".ffn.w1", ag::normal_matrix(d, f, stddev, rng)};
        b1_ = {prefix + ".ffn.b1", ag::Matrix::Zero(1, f)};
        w2_ = {prefix + ".ffn.w2", zero_output ? ag::Matrix::Zero(f, d) : ag::normal_matrix(f, d, stddev, rng)};
        b2_ = {prefix + ".ffn.b2", ag::Matrix::Zero(1, d)};
    }

    ag::Var forward(ag::Tape& tape, ag::Var x) {
        using namespace ag;
        const Eigen::Index d = x.cols();
        const Eigen::Index dh = d / heads_;
        Var h = layer_norm(x, tape.param(ln1_g_), tape.param(ln1_b_));
        Var q = add_row(matmul(h, tape.param(wq_)), tape.param(bq_));
        Var k = add_row(matmul(h, tape.param(wk_)), tape.param(bk_));
        Var v = add_row(matmul(h, tape.param(wv_)), tape.param(bv_));
        std::vector<Var> head_out;
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
        for (int head = 0; head < heads_; ++head) {
            const Eigen::Index start = head * dh;
            Var scores = scale(matmul_nt(cols(q, start, dh), cols(k, start, dh)), inv_sqrt);
            head_out.push_back(matmul(softmax_rows(scores), cols(v, start, dh)));
        }
        Var attn = heads_ == 1 ? head_out.front() : hconcat(head_out);
        Var x1 = add(x, add_row(matmul(attn, tape.param(wo_)), tape.param(bo_)));
        Var h2 = layer_norm(x1, tape.param(ln2_g_), tape.param(ln2_b_));
        Var ff = add_row(matmul(gelu(add_row(matmul(h2, tape.param(w1_)), tape.param(b1_))), tape.param(w2_)),
                         tape.param(b2_));
        return add(x1, ff);
    }

    std::vector<ag::Parameter*> parameters() {
        return {&ln1_g_, &ln1_b_, &wq_, &wk_, &wv_, &bq_, &bk_, &bv_, &wo_, &bo_,
                &ln2_g_, &ln2_b_, &w1_, &b1_, &w2_, &b2_};
    }

private:
    int heads_{1};
    ag::Parameter ln1_g_, ln1_b_, wq_, wk_, wv_, bq_, bk_, bv_, wo_, bo_, ln2_g_, ln2_b_, w1_, b1_, w2_, b2_;
};

/// Small contextual encoder: token + position + segment embeddings, then `layers` blocks and a
/// final layer norm. Exposes the narrow encoder interface (tokenize pair -> ids, ids -> token
/// states).
class ToyEncoder {
public:
    ToyEncoder() = default;

    ToyEncoder(const EncoderConfig& config, std::size_t vocab_size, std::mt19937_64& rng, double stddev) : config_(config) {
        config.validate();
        const auto d = static_cast<Eigen::Index>(config.hidden_size);
        token_ = {"encoder.token_embedding", ag::normal_matrix(static_cast<Eigen::Index>(vocab_size), d, stddev * 5, rng)};
        position_ = {"encoder.position_embedding", ag::normal_matrix(config.max_length, d, stddev, rng)};
        segment_ = {"encoder.segment_embedding", ag::normal_matrix(2, d, stddev, rng)};
        for (int i = 0; i < config.layers; ++i) {
            layers_.emplace_back("encoder.layer" + std::to_string(i), config.hidden_size, config.heads, config.ffn_size,
                                 rng, stddev);
        }
        final_g_ = {"encoder.final_ln.gain", ag::Matrix::Ones(1, d)};
        final_b_ = {"encoder.final_ln.bias", ag::Matrix::Zero(1, d)};
    }

    [[nodiscard]] const EncoderConfig& config() const { return config_; }

    /// Token representations, one row per input token.
    ag::Var forward(ag::Tape& tape, const TokenizedPair& pair) {
        using namespace ag;
        std::vector<int> positions(pair.ids.size());
        for (std::size_t i = 0; i < positions.size(); ++i) {
            positions[i] = static_cast<int>(i);
        }
        Var x = add(add(embedding(tape, token_, pair.ids), embedding(tape, position_, positions)),
                    embedding(tape, segment_, pair.segments));
        for (auto& layer : layers_) {
            x = layer.forward(tape, x);
        }
        return layer_norm(x, tape.param(final_g_), tape.param(final_b_));
    }

    std::vector<ag::Parameter*> parameters() {
        std::vector<ag::Parameter*> out{&token_, &position_, &segment_};
        for (auto& layer : layers_) {
            auto p = layer.parameters();
            out.insert(out.end(), p.begin(), p.end());
        }
        out.push_back(&final_g_);
        out.push_back(&final_b_);
        return out;
    }

private:
    EncoderConfig config_;
    ag::Parameter token_, position_, segment_, final_g_, final_b_;
    std::vector<TransformerLayer> layers_;
};

/// Which experts enter the mixture average besides the global model.
enum class ExpertSet { All, Own };

inline std::string_view to_string(ExpertSet s) { return s == ExpertSet::All ? "all" : "own"; }
inline ExpertSet parse_expert_set(std::string_view s) {
    if (s == "all") return ExpertSet::All;
    if (s == "own") return ExpertSet::Own;
    throw InvalidArgument("unknown expert set '" + std::string(s) + "'");
}

/// Masked softmax of L h. Entries outside the mask are exactly zero.
inline Eigen::VectorXd label_distribution(const Eigen::VectorXd& h, const Eigen::MatrixXd& label_embeddings, const Mask& mask) {
    if (static_cast<std::size_t>(label_embeddings.rows()) != mask.size() || label_embeddings.cols() != h.size()) {
        throw InvalidArgument("label_distribution: shape mismatch");
    }
    ag::Tape tape;
    const ag::Var logits = tape.constant((label_embeddings * h).transpose());
    const ag::Var logp = ag::masked_log_softmax(logits, mask);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(h.size() == 0 ? 0 : label_embeddings.rows());
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (mask[j]) {
            p(static_cast<Eigen::Index>(j)) = std::exp(logp.value()(0, static_cast<Eigen::Index>(j)));
        }
    }
    return p;
}

/// Unweighted mean of the expert distributions and the global distribution. With a mask, every
/// distribution must put zero mass outside it; without one, supports are read off the nonzero
/// entries (an in-mask probability that underflows to 0 then counts as a mismatch).
inline Eigen::VectorXd combine_moe(const std::vector<Eigen::VectorXd>& experts, const Eigen::VectorXd& global,
                                   const Mask* mask = nullptr) {
    if (mask != nullptr && static_cast<std::size_t>(global.size()) != mask->size()) {
        throw InvalidArgument("combine_moe: mask and distributions differ in length");
    }
    auto check = [&](const Eigen::VectorXd& p) {
        if (p.size() != global.size()) {
            throw InvalidArgument("combine_moe: distributions over different label spaces");
        }
        for (Eigen::Index j = 0; j < p.size(); ++j) {
            const bool inside = mask != nullptr ? (*mask)[static_cast<std::size_t>(j)] : global(j) != 0.0;
            const bool bad = mask != nullptr ? (!inside && p(j) != 0.0) : (inside != (p(j) != 0.0));
            if (bad) {
                throw InvalidArgument("combine_moe: distributions have different supports");
            }
        }
    };
    if (mask != nullptr) {
        check(global);
    }
    Eigen::VectorXd sum = global;
    for (const auto& p : experts) {
        check(p);
        sum += p;
    }
    return sum / static_cast<double>(experts.size() + 1);
}

/// Graph-level outputs of one forward pass.
struct ForwardGraph {
    ag::Var tokens;
    std::vector<ag::Var> expert_pooled;
    ag::Var global_pooled;
    std::vector<ag::Var> expert_log_probs;
    ag::Var global_log_probs;
    /// Experts averaged with the global model.
    std::vector<std::size_t> mixture;
    /// Present only when the adversary is enabled.
    std::optional<ag::Var> domain_logits;
};

/// Numeric outputs of one forward pass.
struct ForwardOutput {
    Eigen::MatrixXd expert_pooled;  // K x d_h
    Eigen::VectorXd global_pooled;
    std::vector<Eigen::VectorXd> expert_probs;
    Eigen::VectorXd global_probs;
    Eigen::VectorXd combined;
    Eigen::VectorXd domain_logits;
};

struct ModelOptions {
    EncoderConfig encoder;
    /// Number of domain experts (one per source group).
    int experts{4};
    double init_stddev{0.02};
    /// Start the expert and global blocks as exact identities.
    bool identity_init{false};
    ExpertSet expert_set{ExpertSet::All};
    std::uint64_t seed{42};
};

/// Shared encoder, one added block per domain plus a global block, a single masked label
/// embedding layer, and a dataset classifier fed through gradient reversal.
class MoLEModel {
public:
    MoLEModel(ModelOptions options, Vocabulary vocab, LabelSpace space, std::vector<DatasetDescriptor> descriptors)
        : options_(std::move(options)), vocab_(std::move(vocab)), space_(std::move(space)), descriptors_(std::move(descriptors)) {
        options_.encoder.validate();
        if (options_.experts < 1) {
            throw InvalidArgument("at least one expert is required");
        }
        std::mt19937_64 rng(options_.seed);
        const double sd = options_.init_stddev;
        const int d = options_.encoder.hidden_size;
        encoder_ = ToyEncoder(options_.encoder, vocab_.size(), rng, sd);
        for (int k = 0; k < options_.experts; ++k) {
            experts_.emplace_back("expert" + std::to_string(k), d, options_.encoder.heads, options_.encoder.ffn_size, rng,
                                  sd, options_.identity_init);
        }
        global_ = TransformerLayer("global", d, options_.encoder.heads, options_.encoder.ffn_size, rng, sd,
                                   options_.identity_init);
        label_embedding_ = {"label_embedding", ag::normal_matrix(static_cast<Eigen::Index>(space_.size()), d, sd * 5, rng)};
        const auto classes = static_cast<Eigen::Index>(space_.datasets().size());
        adversary_w_ = {"adversary.weight", ag::normal_matrix(d, std::max<Eigen::Index>(classes, 1), sd, rng)};
        adversary_b_ = {"adversary.bias", ag::Matrix::Zero(1, std::max<Eigen::Index>(classes, 1))};
        for (const auto& name : space_.datasets()) {
            (void)domain_of(name);
        }
    }

    [[nodiscard]] const ModelOptions& options() const { return options_; }
    [[nodiscard]] const Vocabulary& vocabulary() const { return vocab_; }
    [[nodiscard]] const LabelSpace& label_space() const { return space_; }
    [[nodiscard]] const std::vector<DatasetDescriptor>& descriptors() const { return descriptors_; }
    [[nodiscard]] int expert_count() const { return options_.experts; }
    [[nodiscard]] const ag::Matrix& label_embeddings() const { return label_embedding_.value; }

    /// The dataset classifier needs at least two classes to be meaningful.
    [[nodiscard]] bool adversary_enabled() const { return space_.datasets().size() > 1; }
    [[nodiscard]] std::size_t adversary_classes() const { return space_.datasets().size(); }

    /// Expert index of a dataset: its source group.
    [[nodiscard]] std::size_t domain_of(std::string_view dataset) const {
        for (const auto& d : descriptors_) {
            if (d.name == dataset) {
                const auto k = static_cast<std::size_t>(d.source_group);
                if (k >= static_cast<std::size_t>(options_.experts)) {
                    throw InvalidArgument("dataset '" + d.name + "' maps to expert " + std::to_string(k) +
                                          " but the model has " + std::to_string(options_.experts));
                }
                return k;
            }
        }
        throw DatasetNotFound("no descriptor for dataset '" + std::string(dataset) + "'");
    }

    [[nodiscard]] TokenizedPair tokenize(const StanceExample& e) const {
        return encode_pair(e, vocab_, options_.encoder.max_length);
    }

    /// Token states of the shared encoder.
    ag::Var encode(ag::Tape& tape, const TokenizedPair& pair) { return encoder_.forward(tape, pair); }

    /// Pooled (sequence-start) output of expert `k`, or of the global block when k == experts.
    ag::Var expert_forward(ag::Tape& tape, ag::Var tokens, std::size_t k) {
        if (k > static_cast<std::size_t>(options_.experts)) {
            throw InvalidArgument("expert index " + std::to_string(k) + " out of range");
        }
        auto& layer = k == static_cast<std::size_t>(options_.experts) ? global_ : experts_[k];
        return ag::row(layer.forward(tape, tokens), 0);
    }

    [[nodiscard]] std::size_t global_index() const { return static_cast<std::size_t>(options_.experts); }

    /// Log-probabilities of the masked softmax of L h for a pooled 1 x d row.
    ag::Var label_log_probs(ag::Tape& tape, ag::Var pooled, const Mask& mask) {
        return ag::masked_log_softmax(ag::matmul_nt(pooled, tape.param(label_embedding_)), mask);
    }

    /// Dataset-classifier logits; the input passes through gradient reversal.
    ag::Var domain_logits(ag::Tape& tape, ag::Var global_pooled) {
        ag::Var reversed = ag::reverse_gradient(global_pooled);
        return ag::add_row(ag::matmul(reversed, tape.param(adversary_w_)), tape.param(adversary_b_));
    }

    /// Full forward pass. `own_domain` selects the expert used for the own-domain term and, with
    /// ExpertSet::Own, the only expert in the mixture.
    ForwardGraph forward(ag::Tape& tape, const TokenizedPair& pair, const Mask& mask, std::optional<std::size_t> own_domain,
                         bool with_adversary) {
        if (mask.size() != space_.size()) {
            throw InvalidArgument("mask length differs from the label space");
        }
        ForwardGraph out;
        out.tokens = encode(tape, pair);
        for (std::size_t k = 0; k < static_cast<std::size_t>(options_.experts); ++k) {
            out.expert_pooled.push_back(expert_forward(tape, out.tokens, k));
            out.expert_log_probs.push_back(label_log_probs(tape, out.expert_pooled.back(), mask));
        }
        out.global_pooled = expert_forward(tape, out.tokens, global_index());
        out.global_log_probs = label_log_probs(tape, out.global_pooled, mask);
        if (options_.expert_set == ExpertSet::Own && own_domain) {
            out.mixture = {*own_domain};
        } else {
            for (std::size_t k = 0; k < static_cast<std::size_t>(options_.experts); ++k) {
                out.mixture.push_back(k);
            }
        }
        if (with_adversary && adversary_enabled()) {
            out.domain_logits = domain_logits(tape, out.global_pooled);
        }
        return out;
    }

    /// Inference on a frozen snapshot: every distribution over the full label space.
    ForwardOutput predict(const TokenizedPair& pair, const Mask& mask, std::optional<std::size_t> own_domain = std::nullopt) {
        ag::Tape tape;
        auto g = forward(tape, pair, mask, own_domain, adversary_enabled());
        ForwardOutput out;
        const auto d = static_cast<Eigen::Index>(options_.encoder.hidden_size);
        out.expert_pooled.resize(options_.experts, d);
        auto to_probs = [](const ag::Var& logp) {
            Eigen::VectorXd p = logp.value().row(0).transpose().array().exp().matrix();
            return p;
        };
        for (std::size_t k = 0; k < g.expert_pooled.size(); ++k) {
            out.expert_pooled.row(static_cast<Eigen::Index>(k)) = g.expert_pooled[k].value().row(0);
            out.expert_probs.push_back(to_probs(g.expert_log_probs[k]));
        }
        out.global_pooled = g.global_pooled.value().row(0).transpose();
        out.global_probs = to_probs(g.global_log_probs);
        std::vector<Eigen::VectorXd> mixed;
        for (auto k : g.mixture) {
            mixed.push_back(out.expert_probs[k]);
        }
        out.combined = combine_moe(mixed, out.global_probs, &mask);
        if (g.domain_logits) {
            out.domain_logits = g.domain_logits->value().row(0).transpose();
        }
        return out;
    }

    /// Sequence-start state of the shared encoder for raw text (used for label-name and dataset
    /// embeddings without any task training).
    Eigen::VectorXd encode_text(std::string_view context, std::string_view target = {}) {
        ag::Tape tape;
        const auto pair = encode_pair(context, target, vocab_, options_.encoder.max_length);
        return encode(tape, pair).value().row(0).transpose();
    }

    std::vector<ag::Parameter*> parameters() {
        auto out = encoder_.parameters();
        for (auto& e : experts_) {
            auto p = e.parameters();
            out.insert(out.end(), p.begin(), p.end());
        }
        auto g = global_.parameters();
        out.insert(out.end(), g.begin(), g.end());
        out.push_back(&label_embedding_);
        out.push_back(&adversary_w_);
        out.push_back(&adversary_b_);
        return out;
    }

    /// Names of the blocks stacked on the shared encoder (experts then the global block).
    [[nodiscard]] std::vector<std::string> added_layer_names() const {
        std::vector<std::string> out;
        for (int k = 0; k < options_.experts; ++k) {
            out.push_back("expert" + std::to_string(k));
        }
        out.emplace_back("global");
        return out;
    }

    [[nodiscard]] std::vector<ag::Matrix> snapshot() {
        std::vector<ag::Matrix> out;
        for (auto* p : parameters()) {
            out.push_back(p->value);
        }
        return out;
    }

    void restore(const std::vector<ag::Matrix>& values) {
        auto params = parameters();
        if (values.size() != params.size()) {
            throw InvalidArgument("snapshot does not match the model");
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            params[i]->value = values[i];
        }
    }

    void zero_grad() {
        for (auto* p : parameters()) {
            p->zero_grad();
        }
    }

    [[nodiscard]] io::json to_json_doc() {
        io::json doc;
        doc["format"] = "mole-checkpoint-v1";
        doc["encoder"] = to_json(options_.encoder);
        doc["experts"] = options_.experts;
        doc["init_stddev"] = options_.init_stddev;
        doc["expert_set"] = to_string(options_.expert_set);
        doc["seed"] = options_.seed;
        doc["vocabulary"] = {{"lowercase", vocab_.lowercase()}, {"words", vocab_.words()}};
        io::json labels = io::json::array();
        for (const auto& l : space_.labels()) {
            labels.push_back({l.dataset, l.name});
        }
        doc["label_space"] = {{"version", space_.version()}, {"datasets", space_.datasets()}, {"labels", labels}};
        io::json groups = io::json::array();
        for (const auto& [label, group] : space_.groups().assignments()) {
            groups.push_back({label, to_string(group)});
        }
        doc["groups"] = groups;
        io::json neighborhoods = io::json::object();
        for (const auto& [group, neighbors] : space_.groups().neighborhoods()) {
            std::vector<std::string> names;
            for (auto n : neighbors) {
                names.emplace_back(to_string(n));
            }
            neighborhoods[std::string(to_string(group))] = names;
        }
        doc["neighborhoods"] = neighborhoods;
        io::json descriptors = io::json::array();
        for (const auto& d : descriptors_) {
            descriptors.push_back(to_json(d));
        }
        doc["descriptors"] = descriptors;
        io::json params = io::json::object();
        for (auto* p : parameters()) {
            params[p->name] = {{"rows", p->value.rows()},
                               {"cols", p->value.cols()},
                               {"data", std::vector<double>(p->value.data(), p->value.data() + p->value.size())}};
        }
        doc["parameters"] = params;
        return doc;
    }

    void save(const std::filesystem::path& path) { io::write_json_atomic(path, to_json_doc()); }

    static MoLEModel from_json_doc(const io::json& doc) {
        try {
            if (doc.at("format") != "mole-checkpoint-v1") {
                throw SchemaViolation("unsupported checkpoint format");
            }
            ModelOptions options;
            options.encoder = encoder_config_from_json(doc.at("encoder"));
            options.experts = doc.at("experts").get<int>();
            options.init_stddev = doc.at("init_stddev").get<double>();
            options.expert_set = parse_expert_set(doc.at("expert_set").get<std::string>());
            options.seed = doc.at("seed").get<std::uint64_t>();
            Vocabulary vocab(doc.at("vocabulary").at("words").get<std::vector<std::string>>(),
                             doc.at("vocabulary").at("lowercase").get<bool>());
            GroupTable groups;
            for (const auto& row : doc.at("groups")) {
                groups.assign(row.at(0).get<std::string>(), parse_hard_group(row.at(1).get<std::string>()));
            }
            for (const auto& [group, names] : doc.at("neighborhoods").items()) {
                std::vector<HardGroup> neighbors;
                for (const auto& n : names) {
                    neighbors.push_back(parse_hard_group(n.get<std::string>()));
                }
                groups.set_neighborhood(parse_hard_group(group), neighbors);
            }
            std::vector<LabelId> labels;
            for (const auto& row : doc.at("label_space").at("labels")) {
                labels.push_back(LabelId{row.at(0).get<std::string>(), row.at(1).get<std::string>(), labels.size()});
            }
            LabelSpace space(std::move(labels), doc.at("label_space").at("datasets").get<std::vector<std::string>>(),
                             std::move(groups));
            if (space.version() != doc.at("label_space").at("version").get<std::string>()) {
                throw SchemaViolation("label space version mismatch");
            }
            std::vector<DatasetDescriptor> descriptors;
            for (const auto& d : doc.at("descriptors")) {
                descriptors.push_back(descriptor_from_json(d));
            }
            MoLEModel model(options, std::move(vocab), std::move(space), std::move(descriptors));
            const auto& params = doc.at("parameters");
            for (auto* p : model.parameters()) {
                const auto& entry = params.at(p->name);
                const auto rows = entry.at("rows").get<Eigen::Index>();
                const auto cols = entry.at("cols").get<Eigen::Index>();
                const auto data = entry.at("data").get<std::vector<double>>();
                if (rows != p->value.rows() || cols != p->value.cols() || data.size() != static_cast<std::size_t>(rows * cols)) {
                    throw SchemaViolation("parameter '" + p->name + "' has the wrong shape");
                }
                p->value = Eigen::Map<const ag::Matrix>(data.data(), rows, cols);
                p->zero_grad();
            }
            return model;
        } catch (const io::json::exception& e) {
            throw SchemaViolation(std::string("malformed checkpoint: ") + e.what());
        }
    }

    static MoLEModel load(const std::filesystem::path& path) { return from_json_doc(io::read_json(path)); }

private:
    ModelOptions options_;
    Vocabulary vocab_;
    LabelSpace space_;
    std::vector<DatasetDescriptor> descriptors_;
    ToyEncoder encoder_;
    std::vector<TransformerLayer> experts_;
    TransformerLayer global_;
    ag::Parameter label_embedding_;
    ag::Parameter adversary_w_, adversary_b_;
};

}  // namespace stance
