#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vpl/dataset.hpp"
#include "vpl/nn.hpp"
#include "vpl/params.hpp"
#include "vpl/rng.hpp"
#include "vpl/tensor.hpp"

namespace vpl {

enum class FusionMode { mul, add, con };
enum class SrSign { intent, literal };
enum class AnswerEmbeddingMode { learned, frozen_random };

FusionMode parse_fusion_mode(const std::string& name);
std::string fusion_mode_name(FusionMode mode);
SrSign parse_sr_sign(const std::string& name);
std::string sr_sign_name(SrSign sign);
AnswerEmbeddingMode parse_answer_embedding_mode(const std::string& name);
std::string answer_embedding_mode_name(AnswerEmbeddingMode mode);

struct ModelConfig {
    int embed_dim = 16;
    int hidden_dim = 32;
    FusionMode fusion = FusionMode::mul;
    double beta = 0.0;
    double gamma = 0.2;
    int sr_layers = 2;
    double dropout = 0.5;
    SrSign sr_sign = SrSign::intent;
    AnswerEmbeddingMode answer_embedding = AnswerEmbeddingMode::learned;
    bool sr_shared_scorer = true;

    void validate() const;
    static ModelConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

// Question-side word vocabulary; id 0 is the unknown-word bucket.
struct QuestionVocab {
    std::vector<std::string> words;
    std::unordered_map<std::string, std::int32_t> index;

    static QuestionVocab build(std::span<const AnnotatedExample> train);
    std::vector<std::int32_t> encode(const std::string& question_text) const;
};

// a and b combined elementwise (mul/add, equal dims required) or stacked (con).
Tensor fuse(const Tensor& a, const Tensor& b, FusionMode mode);

// Pairwise hinge on the two stream scores. Intent mode prefers s_vqa on top;
// literal mode prefers s_qa.
double score_loss(double s_vqa, double s_qa, double gamma, SrSign sign);

double total_loss(double l_answer, double l_score, double beta);

// Attention-weighted sum of region rows: v_tilde = sum_j g[j] * V[j].
Tensor attention_pool(const Tensor& g, const Tensor& v_regions);

struct ForwardTrace {
    Tensor h_t;
    Tensor attention;   // g over regions, sums to 1
    Tensor v_tilde;
    Tensor fused_qi;
    Tensor p_answer;
    std::int32_t predicted_index = -1;
    Tensor answer_embedding;  // a-hat, only set when the SR branch ran
    Tensor o_vqa;
    Tensor o_qa;
    double s_vqa = 0.0;
    double s_qa = 0.0;
    double loss_answer = 0.0;
    double loss_score = 0.0;
    double loss_total = 0.0;
    bool sr_evaluated = false;
};

class VqaModel {
public:
    VqaModel(ModelConfig config, std::size_t question_vocab_size, std::size_t answer_vocab_size,
             std::uint32_t regions, std::uint32_t feature_dim, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    std::size_t answer_vocab_size() const { return answer_vocab_; }
    std::size_t question_vocab_size() const { return question_vocab_; }

    Tensor encode_question(std::span<const std::int32_t> token_ids) const;

    // Returns (g, v_tilde) for one image's region block.
    std::pair<Tensor, Tensor> attend(const Tensor& h_t, std::span<const float> image) const;

    // Inference path: no dropout, no SR, losses against gt only if gt_index >= 0.
    ForwardTrace forward_eval(std::span<const std::int32_t> token_ids,
                              std::span<const float> image, std::int32_t gt_index = -1) const;

    // Training path: runs the SR branch when beta > 0, accumulates analytic
    // gradients for every parameter into the store.
    ForwardTrace forward_backward(std::span<const std::int32_t> token_ids,
                                  std::span<const float> image, std::int32_t gt_index,
                                  Rng& dropout_rng, bool dropout_enabled = true);

    // Two-stream scores for the true answer. Training-only: `training` false throws.
    std::pair<double, double> sr_scores(const Tensor& fused_qi, const Tensor& h_t,
                                        std::int32_t gt_index, bool training) const;

private:
    struct SrForward;

    Tensor answer_vector(std::int32_t gt_index) const;
    std::vector<std::string> scorer_prefixes() const;
    SrForward sr_forward(const Tensor& fused_qi, const Tensor& h_t, std::int32_t gt_index,
                         const std::vector<Tensor>* dropout_masks) const;

    ModelConfig config_;
    std::size_t question_vocab_ = 0;
    std::size_t answer_vocab_ = 0;
    std::uint32_t regions_ = 0;
    std::uint32_t feature_dim_ = 0;
    ParamStore params_;
};

}  // namespace vpl
