#pragma once

#include <iosfwd>
#include <optional>

#include "huemod/dataset.hpp"
#include "huemod/image.hpp"
#include "huemod/nn.hpp"

#include <json.hpp>

namespace huemod {

enum class BackboneKind { SmallCnn, Resnet50 };

BackboneKind parse_backbone(const std::string& s);
std::string backbone_name(BackboneKind k);

/// Weight-tied feature extractor plus MLP head. Both Siamese branches share
/// the single parameter vector held here.
class SiameseModel {
   public:
    static SiameseModel create(BackboneKind kind, std::uint64_t init_seed);

    BackboneKind kind() const { return kind_; }
    int feature_dim() const { return 256; }
    const nn::ParamLayout& layout() const { return layout_; }
    std::vector<float>& params() { return params_; }
    const std::vector<float>& params() const { return params_; }

    // -- inference --
    Eigen::VectorXf feature(const ImageRaster& patch) const;
    /// z score from a pointwise squared feature difference.
    float head_score(const Eigen::VectorXf& sq_diff) const;
    /// Inconsistency probability from two cached features.
    float predict_from_features(const Eigen::VectorXf& u, const Eigen::VectorXf& v) const;

    // -- training-side access (used by train() and the gradient tests) --
    struct BackboneCache;
    struct HeadCache {
        Eigen::VectorXf input;   // squared difference, dim 256
        Eigen::VectorXf hidden;  // post-ReLU, dim 16
    };
    Eigen::VectorXf feature_train(const ImageRaster& patch, BackboneCache& cache) const;
    float head_forward(const Eigen::VectorXf& sq_diff, HeadCache& cache) const;
    /// Backprop dz through the head; returns gradient w.r.t. the squared difference.
    Eigen::VectorXf head_backward(float dz, const HeadCache& cache, std::vector<float>& grads) const;
    void backbone_backward(const Eigen::VectorXf& dfeat, BackboneCache& cache,
                           std::vector<float>& grads) const;

    /// Number of backbone forward passes since process start (instrumentation).
    static std::uint64_t backbone_calls();

    nlohmann::json metadata;  // persisted with checkpoints

    SiameseModel() = default;

   private:
    void build_architecture();

    BackboneKind kind_ = BackboneKind::SmallCnn;
    nn::ParamLayout layout_;
    std::vector<float> params_;

    // small-cnn backbone
    std::vector<nn::ConvSpec> convs_;
    nn::LinearSpec proj_;
    // resnet50 backbone
    struct Bottleneck {
        nn::ConvSpec reduce, conv3, expand;
        bool has_proj = false;
        nn::ConvSpec proj;
    };
    nn::ConvSpec stem_;
    std::vector<Bottleneck> blocks_;
    // head
    nn::LinearSpec head1_, head2_;

    friend struct SiameseModelAccess;
};

struct SiameseModel::BackboneCache {
    nn::Tensor3 input;
    // small-cnn
    std::vector<nn::Tensor3> acts;
    std::vector<nn::ConvCache> conv_caches;
    Eigen::VectorXf pooled;
    // resnet50
    nn::Tensor3 stem_act;
    nn::ConvCache stem_cache;
    nn::PoolCache pool_cache;
    nn::Tensor3 pool_out;
    struct BlockCache {
        nn::ConvCache c1, c2, c3, cp;
        nn::Tensor3 a1, a2, out;
    };
    std::vector<BlockCache> block_caches;
};

// --- free operations ---

Eigen::VectorXf pointwise_sq_diff(const Eigen::VectorXf& u, const Eigen::VectorXf& v);

float predict_inconsistency(const SiameseModel& model, const ImageRaster& patch_i,
                            const ImageRaster& patch_j);

/// Mean binary cross-entropy over pairs; probabilities clamped to [1e-7, 1-1e-7].
double pair_loss(const std::vector<double>& p, const std::vector<int>& y);

constexpr double kProbClamp = 1e-7;

// --- training ---

struct TrainConfig {
    BackboneKind backbone = BackboneKind::SmallCnn;
    PairMode mode = PairMode::Clean;
    int batch = 64;
    float lr0 = 1e-4f;
    int epochs = 50;
    int pairs_per_epoch = 2000;
    int patience = 10;  // early stopping on validation loss
    std::uint64_t seed = 0;
    std::vector<int> angles = {30, 60, 90, 120, 150, 180, 210, 240, 270, 300, 330};
    bool same_image_pairs = true;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

/// Learning rate schedule: lr0 up to epoch 30, then halved every 5 epochs (1-indexed).
float lr_at_epoch(float lr0, int epoch);

struct EpochRecord {
    int epoch = 0;
    float lr = 0.f;
    double train_loss = 0., val_loss = 0., val_accuracy = 0.;
};

struct TrainResult {
    SiameseModel model;
    std::vector<EpochRecord> curve;
    int best_epoch = 0;
};

/// Trains on pairs built on the fly from the pool; throws on divergence (NaN loss).
/// If log is given, one JSON line is written per epoch.
TrainResult train(const TrainConfig& config, const std::vector<ImageRaster>& pool,
                  std::ostream* log = nullptr);

// --- checkpoints ---

void save_checkpoint(const std::string& path, const SiameseModel& model);
SiameseModel load_checkpoint(const std::string& path);

}  // namespace huemod
