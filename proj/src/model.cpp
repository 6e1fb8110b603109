#include "vpl/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "vpl/common.hpp"

namespace vpl {

FusionMode parse_fusion_mode(const std::string& name) {
    if (name == "mul") return FusionMode::mul;
    if (name == "add") return FusionMode::add;
    if (name == "con") return FusionMode::con;
    throw DataError("unknown fusion mode \"" + name + "\" (expected mul, add or con)");
}

std::string fusion_mode_name(FusionMode mode) {
    switch (mode) {
        case FusionMode::mul: return "mul";
        case FusionMode::add: return "add";
        case FusionMode::con: return "con";
    }
    throw std::invalid_argument("unknown fusion mode value");
}

SrSign parse_sr_sign(const std::string& name) {
    if (name == "intent") return SrSign::intent;
    if (name == "literal") return SrSign::literal;
    throw DataError("unknown sr_sign \"" + name + "\" (expected intent or literal)");
}

std::string sr_sign_name(SrSign sign) {
    return sign == SrSign::intent ? "intent" : "literal";
}

AnswerEmbeddingMode parse_answer_embedding_mode(const std::string& name) {
    if (name == "learned") return AnswerEmbeddingMode::learned;
    if (name == "frozen-random") return AnswerEmbeddingMode::frozen_random;
    throw DataError("unknown answer_embedding \"" + name + "\" (expected learned or frozen-random)");
}

std::string answer_embedding_mode_name(AnswerEmbeddingMode mode) {
    return mode == AnswerEmbeddingMode::learned ? "learned" : "frozen-random";
}

void ModelConfig::validate() const {
    if (embed_dim < 1) throw std::invalid_argument("model config: embed_dim must be >= 1");
    if (hidden_dim < 1) throw std::invalid_argument("model config: hidden_dim must be >= 1");
    if (beta < 0.0) throw std::invalid_argument("model config: beta must be >= 0");
    if (gamma < 0.0) throw std::invalid_argument("model config: gamma must be >= 0");
    if (sr_layers < 1) throw std::invalid_argument("model config: sr_layers must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) {
        throw std::invalid_argument("model config: dropout must lie in [0, 1)");
    }
}

ModelConfig ModelConfig::from_json_text(const std::string& text) {
    ModelConfig config;
    try {
        nlohmann::json j = nlohmann::json::parse(text);
        if (!j.is_object()) throw DataError("model config: expected a json object");
        for (const auto& [key, value] : j.items()) {
            if (key == "embed_dim") config.embed_dim = value.get<int>();
            else if (key == "hidden_dim") config.hidden_dim = value.get<int>();
            else if (key == "fusion") config.fusion = parse_fusion_mode(value.get<std::string>());
            else if (key == "beta") config.beta = value.get<double>();
            else if (key == "gamma") config.gamma = value.get<double>();
            else if (key == "sr_layers") config.sr_layers = value.get<int>();
            else if (key == "dropout") config.dropout = value.get<double>();
            else if (key == "sr_sign") config.sr_sign = parse_sr_sign(value.get<std::string>());
            else if (key == "answer_embedding") {
                config.answer_embedding = parse_answer_embedding_mode(value.get<std::string>());
            } else if (key == "sr_shared_scorer") {
                config.sr_shared_scorer = value.get<bool>();
            } else {
                throw DataError("model config: unknown key \"" + key + "\"");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model config: ") + e.what());
    }
    config.validate();
    return config;
}

std::string ModelConfig::to_json_text() const {
    nlohmann::json j;
    j["embed_dim"] = embed_dim;
    j["hidden_dim"] = hidden_dim;
    j["fusion"] = fusion_mode_name(fusion);
    j["beta"] = beta;
    j["gamma"] = gamma;
    j["sr_layers"] = sr_layers;
    j["dropout"] = dropout;
    j["sr_sign"] = sr_sign_name(sr_sign);
    j["answer_embedding"] = answer_embedding_mode_name(answer_embedding);
    j["sr_shared_scorer"] = sr_shared_scorer;
    return j.dump(2) + "\n";
}

namespace {

std::vector<std::string> tokenize_question(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!current.empty()) {
                tokens.push_back(current);
                current.clear();
            }
        } else {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!current.empty()) tokens.push_back(current);
    return tokens;
}

}  // namespace

QuestionVocab QuestionVocab::build(std::span<const AnnotatedExample> train) {
    std::unordered_map<std::string, std::int64_t> counts;
    for (const AnnotatedExample& ex : train) {
        for (const std::string& w : tokenize_question(ex.question_text)) counts[w] += 1;
    }
    std::vector<std::pair<std::string, std::int64_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    QuestionVocab vocab;
    vocab.words.push_back("<unk>");
    for (const auto& [word, count] : ranked) vocab.words.push_back(word);
    for (std::size_t i = 0; i < vocab.words.size(); ++i) {
        vocab.index[vocab.words[i]] = static_cast<std::int32_t>(i);
    }
    return vocab;
}

std::vector<std::int32_t> QuestionVocab::encode(const std::string& question_text) const {
    std::vector<std::int32_t> ids;
    for (const std::string& w : tokenize_question(question_text)) {
        auto it = index.find(w);
        ids.push_back(it == index.end() ? 0 : it->second);
    }
    return ids;
}

Tensor fuse(const Tensor& a, const Tensor& b, FusionMode mode) {
    if (a.rank() != 1 || b.rank() != 1) throw std::invalid_argument("fuse expects vectors");
    if (mode == FusionMode::con) {
        Tensor out = Tensor::zeros({a.size() + b.size()});
        std::copy(a.data.begin(), a.data.end(), out.data.begin());
        std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
        return out;
    }
    if (a.size() != b.size()) {
        throw std::invalid_argument("fuse " + fusion_mode_name(mode) + " requires equal dims: " +
                                    a.shape_str() + " vs " + b.shape_str());
    }
    Tensor out = a;
    if (mode == FusionMode::mul) {
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
    }
    return out;
}

namespace {

void fuse_backward(const Tensor& a, const Tensor& b, FusionMode mode, const Tensor& dz, Tensor& da,
                   Tensor& db) {
    switch (mode) {
        case FusionMode::mul:
            for (std::size_t i = 0; i < a.size(); ++i) {
                da.data[i] += dz.data[i] * b.data[i];
                db.data[i] += dz.data[i] * a.data[i];
            }
            return;
        case FusionMode::add:
            for (std::size_t i = 0; i < a.size(); ++i) {
                da.data[i] += dz.data[i];
                db.data[i] += dz.data[i];
            }
            return;
        case FusionMode::con:
            for (std::size_t i = 0; i < a.size(); ++i) da.data[i] += dz.data[i];
            for (std::size_t i = 0; i < b.size(); ++i) db.data[i] += dz.data[a.size() + i];
            return;
    }
}

}  // namespace

double score_loss(double s_vqa, double s_qa, double gamma, SrSign sign) {
    if (gamma < 0.0) throw std::invalid_argument("score_loss: gamma must be >= 0");
    double arg = sign == SrSign::intent ? s_qa - s_vqa + gamma : s_vqa - s_qa + gamma;
    return std::max(0.0, arg);
}

double total_loss(double l_answer, double l_score, double beta) {
    if (beta < 0.0) throw std::invalid_argument("total_loss: beta must be >= 0");
    return l_answer + beta * l_score;
}

Tensor attention_pool(const Tensor& g, const Tensor& v_regions) {
    if (g.rank() != 1 || v_regions.rank() != 2 || v_regions.dim(0) != g.dim(0)) {
        throw std::invalid_argument("attention_pool shape mismatch: g " + g.shape_str() +
                                    ", V " + v_regions.shape_str());
    }
    std::size_t n = v_regions.dim(0), k = v_regions.dim(1);
    Tensor out = Tensor::zeros({k});
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t d = 0; d < k; ++d) out.data[d] += g.data[j] * v_regions.at(j, d);
    }
    return out;
}

VqaModel::VqaModel(ModelConfig config, std::size_t question_vocab_size,
                   std::size_t answer_vocab_size, std::uint32_t regions, std::uint32_t feature_dim,
                   std::uint64_t seed)
    : config_(config),
      question_vocab_(question_vocab_size),
      answer_vocab_(answer_vocab_size),
      regions_(regions),
      feature_dim_(feature_dim) {
    config_.validate();
    if (question_vocab_ == 0) throw std::invalid_argument("model: question vocabulary is empty");
    if (answer_vocab_ == 0) throw std::invalid_argument("model: answer vocabulary is empty");
    if (regions_ == 0) throw std::invalid_argument("model: regions must be >= 1");
    if (feature_dim_ == 0) throw std::invalid_argument("model: feature_dim must be >= 1");

    std::size_t E = static_cast<std::size_t>(config_.embed_dim);
    std::size_t H = static_cast<std::size_t>(config_.hidden_dim);
    std::size_t k = feature_dim_;
    std::size_t fuse_dim = config_.fusion == FusionMode::con ? 2 * H : H;

    // Each parameter draws from its own named stream so that adding or
    // removing a parameter leaves every other init untouched.
    auto init_matrix = [&](const std::string& name, std::size_t p, std::size_t m,
                           bool trainable = true) {
        Tensor t = Tensor::zeros({p, m});
        Rng rng(derive_seed(seed, name));
        double scale = 1.0 / std::sqrt(static_cast<double>(m));
        for (double& v : t.data) v = rng.gaussian() * scale;
        params_.create(name, std::move(t), trainable);
    };
    auto init_bias = [&](const std::string& name, std::size_t p) {
        params_.create(name, Tensor::zeros({p}));
    };

    init_matrix("embed.words", question_vocab_, E);
    init_matrix("encoder.w", H, E);
    init_bias("encoder.b", H);
    init_matrix("attn.wq", H, H);
    init_matrix("attn.wv", H, k);
    init_bias("attn.b1", H);
    init_matrix("attn.w2", 1, H);
    init_bias("attn.b2", 1);
    init_matrix("proj_v.w", H, k);
    init_bias("proj_v.b", H);
    init_matrix("cls.w1", H, fuse_dim);
    init_bias("cls.b1", H);
    init_matrix("cls.w2", answer_vocab_, H);
    init_bias("cls.b2", answer_vocab_);
    init_matrix("embed.answers", answer_vocab_, E,
                config_.answer_embedding == AnswerEmbeddingMode::learned);
    init_matrix("sr.proj_a.w", H, E);
    init_bias("sr.proj_a.b", H);

    int L = config_.sr_layers;
    for (const std::string& prefix : scorer_prefixes()) {
        for (int l = 0; l < L; ++l) {
            std::size_t in_dim = l == 0 ? fuse_dim : H;
            std::size_t out_dim = l == L - 1 ? 1 : H;
            std::string base = prefix + ".l" + std::to_string(l);
            init_matrix(base + ".w", out_dim, in_dim);
            init_bias(base + ".b", out_dim);
        }
    }
}

std::vector<std::string> VqaModel::scorer_prefixes() const {
    if (config_.sr_shared_scorer) return {"sr"};
    return {"sr", "sr_qa"};
}

Tensor VqaModel::answer_vector(std::int32_t gt_index) const {
    if (gt_index < 0 || static_cast<std::size_t>(gt_index) >= answer_vocab_) {
        throw std::invalid_argument("answer index " + std::to_string(gt_index) +
                                    " out of range for vocabulary of " +
                                    std::to_string(answer_vocab_));
    }
    const Tensor& table = params_.at("embed.answers").value;
    std::size_t E = table.dim(1);
    Tensor a = Tensor::zeros({E});
    for (std::size_t d = 0; d < E; ++d) a.data[d] = table.at(static_cast<std::size_t>(gt_index), d);
    return a;
}

Tensor VqaModel::encode_question(std::span<const std::int32_t> token_ids) const {
    if (token_ids.empty()) throw std::invalid_argument("encode_question: empty token sequence");
    const Tensor& table = params_.at("embed.words").value;
    std::size_t E = table.dim(1);
    Tensor x = Tensor::zeros({E});
    for (std::int32_t id : token_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= question_vocab_) {
            throw DataError("question token id " + std::to_string(id) +
                            " out of range for vocabulary of " + std::to_string(question_vocab_));
        }
        for (std::size_t d = 0; d < E; ++d) x.data[d] += table.at(static_cast<std::size_t>(id), d);
    }
    double inv = 1.0 / static_cast<double>(token_ids.size());
    for (double& v : x.data) v *= inv;
    return relu(affine(x, params_.at("encoder.w").value, params_.at("encoder.b").value));
}

namespace {

Tensor region_tensor(std::span<const float> image, std::uint32_t regions, std::uint32_t dim) {
    if (image.size() != static_cast<std::size_t>(regions) * dim) {
        throw std::invalid_argument("image block has " + std::to_string(image.size()) +
                                    " values, expected " + std::to_string(regions) + " x " +
                                    std::to_string(dim));
    }
    Tensor v = Tensor::zeros({regions, dim});
    for (std::size_t i = 0; i < image.size(); ++i) v.data[i] = static_cast<double>(image[i]);
    ensure_finite(v.data, "image features");
    return v;
}

}  // namespace

std::pair<Tensor, Tensor> VqaModel::attend(const Tensor& h_t, std::span<const float> image) const {
    Tensor v = region_tensor(image, regions_, feature_dim_);
    std::size_t n = regions_;
    const Tensor& wq = params_.at("attn.wq").value;
    const Tensor& wv = params_.at("attn.wv").value;
    const Tensor& b1 = params_.at("attn.b1").value;
    const Tensor& w2 = params_.at("attn.w2").value;
    const Tensor& b2 = params_.at("attn.b2").value;
    std::size_t H = b1.size();

    Tensor logits = Tensor::zeros({n});
    for (std::size_t j = 0; j < n; ++j) {
        double logit = b2.data[0];
        for (std::size_t i = 0; i < H; ++i) {
            double pre = b1.data[i];
            for (std::size_t h = 0; h < H; ++h) pre += wq.at(i, h) * h_t.data[h];
            for (std::size_t d = 0; d < feature_dim_; ++d) pre += wv.at(i, d) * v.at(j, d);
            if (pre > 0.0) logit += w2.at(0, i) * pre;
        }
        logits.data[j] = logit;
    }
    Tensor g = softmax(logits);
    return {g, attention_pool(g, v)};
}

struct VqaModel::SrForward {
    Tensor a_hat;
    Tensor a_h;
    Tensor o_vqa;
    Tensor o_qa;
    struct Stream {
        std::vector<Tensor> pre;      // hidden-layer preactivations
        std::vector<Tensor> dropped;  // post-relu, post-mask layer outputs
        double score = 0.0;
    };
    Stream vqa;
    Stream qa;
};

VqaModel::SrForward VqaModel::sr_forward(const Tensor& fused_qi, const Tensor& h_t,
                                         std::int32_t gt_index,
                                         const std::vector<Tensor>* dropout_masks) const {
    SrForward sr;
    sr.a_hat = answer_vector(gt_index);
    sr.a_h = affine(sr.a_hat, params_.at("sr.proj_a.w").value, params_.at("sr.proj_a.b").value);
    sr.o_vqa = fuse(fused_qi, sr.a_h, config_.fusion);
    sr.o_qa = fuse(h_t, sr.a_h, config_.fusion);

    int L = config_.sr_layers;
    auto run_stream = [&](const Tensor& input, const std::string& prefix) {
        SrForward::Stream stream;
        Tensor z = input;
        for (int l = 0; l < L - 1; ++l) {
            std::string base = prefix + ".l" + std::to_string(l);
            Tensor pre = affine(z, params_.at(base + ".w").value, params_.at(base + ".b").value);
            Tensor act = relu(pre);
            if (dropout_masks) act = elementwise_mul(act, (*dropout_masks)[static_cast<std::size_t>(l)]);
            stream.pre.push_back(std::move(pre));
            stream.dropped.push_back(act);
            z = std::move(act);
        }
        std::string base = prefix + ".l" + std::to_string(L - 1);
        Tensor out = affine(z, params_.at(base + ".w").value, params_.at(base + ".b").value);
        stream.score = out.data[0];
        return stream;
    };
    sr.vqa = run_stream(sr.o_vqa, "sr");
    sr.qa = run_stream(sr.o_qa, config_.sr_shared_scorer ? "sr" : "sr_qa");
    return sr;
}

std::pair<double, double> VqaModel::sr_scores(const Tensor& fused_qi, const Tensor& h_t,
                                              std::int32_t gt_index, bool training) const {
    if (!training) {
        throw std::logic_error(
            "sr scores are training-only; inference uses the answer head alone");
    }
    SrForward sr = sr_forward(fused_qi, h_t, gt_index, nullptr);
    return {sr.vqa.score, sr.qa.score};
}

ForwardTrace VqaModel::forward_eval(std::span<const std::int32_t> token_ids,
                                    std::span<const float> image, std::int32_t gt_index) const {
    ForwardTrace trace;
    trace.h_t = encode_question(token_ids);
    auto [g, v_tilde] = attend(trace.h_t, image);
    trace.attention = std::move(g);
    trace.v_tilde = std::move(v_tilde);

    Tensor v_p = relu(affine(trace.v_tilde, params_.at("proj_v.w").value, params_.at("proj_v.b").value));
    Tensor z0 = fuse(v_p, trace.h_t, config_.fusion);
    trace.fused_qi = relu(affine(z0, params_.at("cls.w1").value, params_.at("cls.b1").value));
    Tensor logits = affine(trace.fused_qi, params_.at("cls.w2").value, params_.at("cls.b2").value);
    trace.p_answer = softmax(logits);

    trace.predicted_index = 0;
    for (std::size_t i = 1; i < trace.p_answer.size(); ++i) {
        if (trace.p_answer.data[i] > trace.p_answer.data[static_cast<std::size_t>(trace.predicted_index)]) {
            trace.predicted_index = static_cast<std::int32_t>(i);
        }
    }
    if (gt_index >= 0) {
        trace.loss_answer = cross_entropy(trace.p_answer, static_cast<std::size_t>(gt_index));
        trace.loss_total = trace.loss_answer;
    }
    return trace;
}

ForwardTrace VqaModel::forward_backward(std::span<const std::int32_t> token_ids,
                                        std::span<const float> image, std::int32_t gt_index,
                                        Rng& dropout_rng, bool dropout_enabled) {
    if (gt_index < 0 || static_cast<std::size_t>(gt_index) >= answer_vocab_) {
        throw std::invalid_argument("forward_backward: gt_index out of range");
    }
    std::size_t H = static_cast<std::size_t>(config_.hidden_dim);
    std::size_t E = static_cast<std::size_t>(config_.embed_dim);
    std::size_t k = feature_dim_;
    std::size_t n = regions_;

    // Forward, keeping every intermediate needed by the backward sweep.
    if (token_ids.empty()) throw std::invalid_argument("encode_question: empty token sequence");
    const Tensor& word_table = params_.at("embed.words").value;
    Tensor x_e = Tensor::zeros({E});
    for (std::int32_t id : token_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= question_vocab_) {
            throw DataError("question token id " + std::to_string(id) +
                            " out of range for vocabulary of " + std::to_string(question_vocab_));
        }
        for (std::size_t d = 0; d < E; ++d) x_e.data[d] += word_table.at(static_cast<std::size_t>(id), d);
    }
    double inv_len = 1.0 / static_cast<double>(token_ids.size());
    for (double& v : x_e.data) v *= inv_len;

    Tensor h_pre = affine(x_e, params_.at("encoder.w").value, params_.at("encoder.b").value);
    Tensor h_t = relu(h_pre);

    Tensor v = region_tensor(image, regions_, feature_dim_);
    const Tensor& wq = params_.at("attn.wq").value;
    const Tensor& wv = params_.at("attn.wv").value;
    const Tensor& ab1 = params_.at("attn.b1").value;
    const Tensor& aw2 = params_.at("attn.w2").value;
    const Tensor& ab2 = params_.at("attn.b2").value;

    std::vector<Tensor> u_pre(n), u_act(n);
    Tensor logits_attn = Tensor::zeros({n});
    for (std::size_t j = 0; j < n; ++j) {
        Tensor pre = Tensor::zeros({H});
        for (std::size_t i = 0; i < H; ++i) {
            double acc = ab1.data[i];
            for (std::size_t h = 0; h < H; ++h) acc += wq.at(i, h) * h_t.data[h];
            for (std::size_t d = 0; d < k; ++d) acc += wv.at(i, d) * v.at(j, d);
            pre.data[i] = acc;
        }
        u_pre[j] = pre;
        u_act[j] = relu(pre);
        double logit = ab2.data[0];
        for (std::size_t i = 0; i < H; ++i) logit += aw2.at(0, i) * u_act[j].data[i];
        logits_attn.data[j] = logit;
    }
    Tensor g = softmax(logits_attn);
    Tensor v_tilde = attention_pool(g, v);

    Tensor vp_pre = affine(v_tilde, params_.at("proj_v.w").value, params_.at("proj_v.b").value);
    Tensor v_p = relu(vp_pre);
    Tensor z0 = fuse(v_p, h_t, config_.fusion);
    Tensor f_pre = affine(z0, params_.at("cls.w1").value, params_.at("cls.b1").value);
    Tensor fused_qi = relu(f_pre);
    Tensor logits_ans = affine(fused_qi, params_.at("cls.w2").value, params_.at("cls.b2").value);
    Tensor p = softmax(logits_ans);
    double l_answer = cross_entropy(p, static_cast<std::size_t>(gt_index));

    bool run_sr = config_.beta > 0.0;
    std::vector<Tensor> masks;
    const std::vector<Tensor>* masks_ptr = nullptr;
    SrForward sr;
    double l_score = 0.0;
    if (run_sr) {
        if (dropout_enabled && config_.dropout > 0.0 && config_.sr_layers > 1) {
            // One mask per layer gap, shared by both streams so that equal
            // stream inputs still produce equal scores.
            for (int l = 0; l < config_.sr_layers - 1; ++l) {
                masks.push_back(dropout_mask(dropout_rng, H, config_.dropout));
            }
            masks_ptr = &masks;
        }
        sr = sr_forward(fused_qi, h_t, gt_index, masks_ptr);
        l_score = score_loss(sr.vqa.score, sr.qa.score, config_.gamma, config_.sr_sign);
    }
    double l_total = total_loss(l_answer, l_score, config_.beta);
    ensure_finite(l_total, "training loss");

    // Backward.
    Tensor dh_t = Tensor::zeros({H});
    Tensor dfused_qi = Tensor::zeros({H});

    if (run_sr) {
        double darg = config_.beta;
        double hinge_arg = config_.sr_sign == SrSign::intent
                               ? sr.qa.score - sr.vqa.score + config_.gamma
                               : sr.vqa.score - sr.qa.score + config_.gamma;
        double ds_vqa = 0.0, ds_qa = 0.0;
        if (hinge_arg > 0.0) {
            if (config_.sr_sign == SrSign::intent) {
                ds_qa = darg;
                ds_vqa = -darg;
            } else {
                ds_vqa = darg;
                ds_qa = -darg;
            }
        }

        int L = config_.sr_layers;
        auto stream_backward = [&](const SrForward::Stream& stream, const Tensor& input,
                                   const std::string& prefix, double ds, Tensor& dinput) {
            std::string last = prefix + ".l" + std::to_string(L - 1);
            const Tensor& last_in = L > 1 ? stream.dropped.back() : input;
            Tensor dy = Tensor::vec({ds});
            Tensor dz = Tensor::zeros({last_in.size()});
            affine_backward(last_in, params_.at(last + ".w").value, dy, &dz,
                            &params_.at(last + ".w").grad, &params_.at(last + ".b").grad);
            for (int l = L - 2; l >= 0; --l) {
                if (masks_ptr) {
                    dz = elementwise_mul(dz, (*masks_ptr)[static_cast<std::size_t>(l)]);
                }
                Tensor dpre = Tensor::zeros({dz.size()});
                relu_backward(stream.pre[static_cast<std::size_t>(l)], dz, dpre);
                const Tensor& layer_in = l == 0 ? input : stream.dropped[static_cast<std::size_t>(l - 1)];
                std::string base = prefix + ".l" + std::to_string(l);
                Tensor dlayer_in = Tensor::zeros({layer_in.size()});
                affine_backward(layer_in, params_.at(base + ".w").value, dpre, &dlayer_in,
                                &params_.at(base + ".w").grad, &params_.at(base + ".b").grad);
                dz = std::move(dlayer_in);
            }
            for (std::size_t i = 0; i < dinput.size(); ++i) dinput.data[i] += dz.data[i];
        };

        Tensor do_vqa = Tensor::zeros({sr.o_vqa.size()});
        Tensor do_qa = Tensor::zeros({sr.o_qa.size()});
        if (ds_vqa != 0.0) stream_backward(sr.vqa, sr.o_vqa, "sr", ds_vqa, do_vqa);
        if (ds_qa != 0.0) {
            stream_backward(sr.qa, sr.o_qa, config_.sr_shared_scorer ? "sr" : "sr_qa", ds_qa, do_qa);
        }

        Tensor da_h = Tensor::zeros({H});
        fuse_backward(fused_qi, sr.a_h, config_.fusion, do_vqa, dfused_qi, da_h);
        fuse_backward(h_t, sr.a_h, config_.fusion, do_qa, dh_t, da_h);

        Tensor da_hat = Tensor::zeros({E});
        affine_backward(sr.a_hat, params_.at("sr.proj_a.w").value, da_h, &da_hat,
                        &params_.at("sr.proj_a.w").grad, &params_.at("sr.proj_a.b").grad);
        Tensor& answer_grad = params_.at("embed.answers").grad;
        for (std::size_t d = 0; d < E; ++d) {
            answer_grad.at(static_cast<std::size_t>(gt_index), d) += da_hat.data[d];
        }
    }

    Tensor dp = Tensor::zeros({p.size()});
    cross_entropy_backward(p, static_cast<std::size_t>(gt_index), 1.0, dp);
    Tensor dlogits_ans = Tensor::zeros({p.size()});
    softmax_backward(p, dp, dlogits_ans);
    affine_backward(fused_qi, params_.at("cls.w2").value, dlogits_ans, &dfused_qi,
                    &params_.at("cls.w2").grad, &params_.at("cls.b2").grad);

    Tensor df_pre = Tensor::zeros({H});
    relu_backward(f_pre, dfused_qi, df_pre);
    Tensor dz0 = Tensor::zeros({z0.size()});
    affine_backward(z0, params_.at("cls.w1").value, df_pre, &dz0, &params_.at("cls.w1").grad,
                    &params_.at("cls.b1").grad);

    Tensor dv_p = Tensor::zeros({H});
    fuse_backward(v_p, h_t, config_.fusion, dz0, dv_p, dh_t);

    Tensor dvp_pre = Tensor::zeros({H});
    relu_backward(vp_pre, dv_p, dvp_pre);
    Tensor dv_tilde = Tensor::zeros({k});
    affine_backward(v_tilde, params_.at("proj_v.w").value, dvp_pre, &dv_tilde,
                    &params_.at("proj_v.w").grad, &params_.at("proj_v.b").grad);

    Tensor dg = Tensor::zeros({n});
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t d = 0; d < k; ++d) acc += dv_tilde.data[d] * v.at(j, d);
        dg.data[j] = acc;
    }
    Tensor dlogits_attn = Tensor::zeros({n});
    softmax_backward(g, dg, dlogits_attn);

    for (std::size_t j = 0; j < n; ++j) {
        if (dlogits_attn.data[j] == 0.0) continue;
        Tensor dlogit = Tensor::vec({dlogits_attn.data[j]});
        Tensor du = Tensor::zeros({H});
        affine_backward(u_act[j], params_.at("attn.w2").value, dlogit, &du,
                        &params_.at("attn.w2").grad, &params_.at("attn.b2").grad);
        Tensor du_pre = Tensor::zeros({H});
        relu_backward(u_pre[j], du, du_pre);
        affine_backward(h_t, params_.at("attn.wq").value, du_pre, &dh_t,
                        &params_.at("attn.wq").grad, &params_.at("attn.b1").grad);
        Tensor v_j = Tensor::zeros({k});
        for (std::size_t d = 0; d < k; ++d) v_j.data[d] = v.at(j, d);
        affine_backward(v_j, params_.at("attn.wv").value, du_pre, nullptr,
                        &params_.at("attn.wv").grad, nullptr);
    }

    Tensor dh_pre = Tensor::zeros({H});
    relu_backward(h_pre, dh_t, dh_pre);
    Tensor dx_e = Tensor::zeros({E});
    affine_backward(x_e, params_.at("encoder.w").value, dh_pre, &dx_e,
                    &params_.at("encoder.w").grad, &params_.at("encoder.b").grad);
    Tensor& word_grad = params_.at("embed.words").grad;
    for (std::int32_t id : token_ids) {
        for (std::size_t d = 0; d < E; ++d) {
            word_grad.at(static_cast<std::size_t>(id), d) += dx_e.data[d] * inv_len;
        }
    }

    ForwardTrace trace;
    trace.h_t = std::move(h_t);
    trace.attention = std::move(g);
    trace.v_tilde = std::move(v_tilde);
    trace.fused_qi = std::move(fused_qi);
    trace.p_answer = std::move(p);
    trace.predicted_index = 0;
    for (std::size_t i = 1; i < trace.p_answer.size(); ++i) {
        if (trace.p_answer.data[i] > trace.p_answer.data[static_cast<std::size_t>(trace.predicted_index)]) {
            trace.predicted_index = static_cast<std::int32_t>(i);
        }
    }
    trace.loss_answer = l_answer;
    trace.loss_score = l_score;
    trace.loss_total = l_total;
    trace.sr_evaluated = run_sr;
    if (run_sr) {
        trace.answer_embedding = std::move(sr.a_hat);
        trace.o_vqa = std::move(sr.o_vqa);
        trace.o_qa = std::move(sr.o_qa);
        trace.s_vqa = sr.vqa.score;
        trace.s_qa = sr.qa.score;
    }
    return trace;
}

}  // namespace vpl
