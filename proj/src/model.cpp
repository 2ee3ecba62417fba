#include "huemod/model.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>

#include "huemod/rng.hpp"

using nlohmann::json;

namespace huemod {

namespace {

std::atomic<std::uint64_t> g_backbone_calls{0};

nn::Tensor3 patch_to_tensor(const ImageRaster& patch) {
    nn::Tensor3 x;
    x.resize(3, patch.h, patch.w);
    for (int ch = 0; ch < 3; ++ch)
        for (int r = 0; r < patch.h; ++r)
            for (int c = 0; c < patch.w; ++c)
                x.at(ch, r, c) = patch.at(r, c, ch) / 255.f - 0.5f;
    return x;
}

float sigmoidf(float z) { return 1.f / (1.f + std::exp(-z)); }

}  // namespace

BackboneKind parse_backbone(const std::string& s) {
    if (s == "small-cnn") return BackboneKind::SmallCnn;
    if (s == "resnet50") return BackboneKind::Resnet50;
    throw std::invalid_argument("unknown backbone: " + s);
}

std::string backbone_name(BackboneKind k) {
    return k == BackboneKind::SmallCnn ? "small-cnn" : "resnet50";
}

std::uint64_t SiameseModel::backbone_calls() { return g_backbone_calls.load(); }

void SiameseModel::build_architecture() {
    auto add_conv = [&](const std::string& name, int in_c, int out_c, int k, int stride, int pad) {
        nn::ConvSpec s;
        s.in_c = in_c;
        s.out_c = out_c;
        s.k = k;
        s.stride = stride;
        s.pad = pad;
        s.w = layout_.add(name + ".w", out_c, in_c * k * k);
        s.b = layout_.add(name + ".b", out_c, 1);
        return s;
    };
    auto add_linear = [&](const std::string& name, int in, int out) {
        nn::LinearSpec s;
        s.in = in;
        s.out = out;
        s.w = layout_.add(name + ".w", out, in);
        s.b = layout_.add(name + ".b", out, 1);
        return s;
    };

    int feat_in = 0;
    if (kind_ == BackboneKind::SmallCnn) {
        const int ch[5] = {3, 16, 32, 64, 128};
        for (int i = 0; i < 4; ++i)
            convs_.push_back(add_conv("conv" + std::to_string(i + 1), ch[i], ch[i + 1], 3, 2, 1));
        feat_in = ch[4];
    } else {
        stem_ = add_conv("stem", 3, 64, 7, 2, 3);
        const int base[4] = {64, 128, 256, 512};
        const int depth[4] = {3, 4, 6, 3};
        int in_c = 64;
        for (int st = 0; st < 4; ++st) {
            for (int bl = 0; bl < depth[st]; ++bl) {
                const std::string nm = "s" + std::to_string(st + 1) + "b" + std::to_string(bl + 1);
                const int stride = (bl == 0 && st > 0) ? 2 : 1;
                Bottleneck bn;
                bn.reduce = add_conv(nm + ".reduce", in_c, base[st], 1, 1, 0);
                bn.conv3 = add_conv(nm + ".conv3", base[st], base[st], 3, stride, 1);
                bn.expand = add_conv(nm + ".expand", base[st], base[st] * 4, 1, 1, 0);
                if (bl == 0) {
                    bn.has_proj = true;
                    bn.proj = add_conv(nm + ".proj", in_c, base[st] * 4, 1, stride, 0);
                }
                blocks_.push_back(bn);
                in_c = base[st] * 4;
            }
        }
        feat_in = in_c;  // 2048
    }
    proj_ = add_linear("proj", feat_in, 256);
    head1_ = add_linear("head1", 256, 16);
    head2_ = add_linear("head2", 16, 1);
}

SiameseModel SiameseModel::create(BackboneKind kind, std::uint64_t init_seed) {
    SiameseModel m;
    m.kind_ = kind;
    m.build_architecture();
    nn::init_params(m.layout_, m.params_, init_seed);
    m.metadata["backbone_kind"] = backbone_name(kind);
    m.metadata["init_seed"] = init_seed;
    return m;
}

Eigen::VectorXf SiameseModel::feature_train(const ImageRaster& patch, BackboneCache& cache) const {
    g_backbone_calls.fetch_add(1, std::memory_order_relaxed);
    cache.input = patch_to_tensor(patch);
    Eigen::VectorXf pooled;
    if (kind_ == BackboneKind::SmallCnn) {
        cache.acts.resize(convs_.size());
        cache.conv_caches.resize(convs_.size());
        const nn::Tensor3* x = &cache.input;
        for (std::size_t i = 0; i < convs_.size(); ++i) {
            nn::conv2d_forward(convs_[i], layout_, params_, *x, cache.acts[i], cache.conv_caches[i]);
            nn::relu_inplace(cache.acts[i]);
            x = &cache.acts[i];
        }
        nn::global_avg_pool(*x, pooled);
    } else {
        nn::conv2d_forward(stem_, layout_, params_, cache.input, cache.stem_act, cache.stem_cache);
        nn::relu_inplace(cache.stem_act);
        nn::maxpool_forward(cache.stem_act, cache.pool_out, cache.pool_cache);
        cache.block_caches.resize(blocks_.size());
        const nn::Tensor3* x = &cache.pool_out;
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const Bottleneck& bn = blocks_[i];
            auto& bc = cache.block_caches[i];
            nn::conv2d_forward(bn.reduce, layout_, params_, *x, bc.a1, bc.c1);
            nn::relu_inplace(bc.a1);
            nn::conv2d_forward(bn.conv3, layout_, params_, bc.a1, bc.a2, bc.c2);
            nn::relu_inplace(bc.a2);
            nn::conv2d_forward(bn.expand, layout_, params_, bc.a2, bc.out, bc.c3);
            if (bn.has_proj) {
                nn::Tensor3 idn;
                nn::conv2d_forward(bn.proj, layout_, params_, *x, idn, bc.cp);
                for (std::size_t t = 0; t < bc.out.v.size(); ++t) bc.out.v[t] += idn.v[t];
            } else {
                for (std::size_t t = 0; t < bc.out.v.size(); ++t) bc.out.v[t] += x->v[t];
            }
            nn::relu_inplace(bc.out);
            x = &bc.out;
        }
        nn::global_avg_pool(*x, pooled);
    }
    cache.pooled = pooled;
    Eigen::VectorXf feat;
    nn::linear_forward(proj_, layout_, params_, pooled, feat);
    return feat;
}

Eigen::VectorXf SiameseModel::feature(const ImageRaster& patch) const {
    BackboneCache cache;
    return feature_train(patch, cache);
}

void SiameseModel::backbone_backward(const Eigen::VectorXf& dfeat, BackboneCache& cache,
                                     std::vector<float>& grads) const {
    Eigen::VectorXf dpooled;
    nn::linear_backward(proj_, layout_, params_, cache.pooled, dfeat, dpooled, grads);
    if (kind_ == BackboneKind::SmallCnn) {
        const nn::Tensor3& last = cache.acts.back();
        nn::Tensor3 dx, dprev;
        nn::global_avg_pool_backward(dpooled, last.h, last.w, dx);
        for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
            nn::relu_backward_inplace(cache.acts[i], dx);
            nn::conv2d_backward(convs_[i], layout_, params_, cache.conv_caches[i], dx, dprev, grads,
                                i > 0);
            if (i > 0) std::swap(dx, dprev);
        }
    } else {
        const nn::Tensor3& last = cache.block_caches.back().out;
        nn::Tensor3 dx;
        nn::global_avg_pool_backward(dpooled, last.h, last.w, dx);
        for (int i = static_cast<int>(blocks_.size()) - 1; i >= 0; --i) {
            const Bottleneck& bn = blocks_[i];
            auto& bc = cache.block_caches[i];
            nn::relu_backward_inplace(bc.out, dx);
            nn::Tensor3 da2, da1, dx_main;
            nn::conv2d_backward(bn.expand, layout_, params_, bc.c3, dx, da2, grads);
            nn::relu_backward_inplace(bc.a2, da2);
            nn::conv2d_backward(bn.conv3, layout_, params_, bc.c2, da2, da1, grads);
            nn::relu_backward_inplace(bc.a1, da1);
            nn::conv2d_backward(bn.reduce, layout_, params_, bc.c1, da1, dx_main, grads);
            if (bn.has_proj) {
                nn::Tensor3 dskip;
                nn::conv2d_backward(bn.proj, layout_, params_, bc.cp, dx, dskip, grads);
                for (std::size_t t = 0; t < dx_main.v.size(); ++t) dx_main.v[t] += dskip.v[t];
            } else {
                for (std::size_t t = 0; t < dx_main.v.size(); ++t) dx_main.v[t] += dx.v[t];
            }
            std::swap(dx, dx_main);
        }
        nn::Tensor3 dstem;
        nn::maxpool_backward(cache.pool_cache, dx, dstem);
        nn::relu_backward_inplace(cache.stem_act, dstem);
        nn::Tensor3 unused;
        nn::conv2d_backward(stem_, layout_, params_, cache.stem_cache, dstem, unused, grads, false);
    }
}

float SiameseModel::head_forward(const Eigen::VectorXf& sq_diff, HeadCache& cache) const {
    cache.input = sq_diff;
    nn::linear_forward(head1_, layout_, params_, sq_diff, cache.hidden);
    for (int i = 0; i < cache.hidden.size(); ++i)
        if (cache.hidden[i] < 0.f) cache.hidden[i] = 0.f;
    Eigen::VectorXf z;
    nn::linear_forward(head2_, layout_, params_, cache.hidden, z);
    return z[0];
}

Eigen::VectorXf SiameseModel::head_backward(float dz, const HeadCache& cache,
                                            std::vector<float>& grads) const {
    Eigen::VectorXf dzv(1);
    dzv[0] = dz;
    Eigen::VectorXf dhidden, dinput;
    nn::linear_backward(head2_, layout_, params_, cache.hidden, dzv, dhidden, grads);
    for (int i = 0; i < dhidden.size(); ++i)
        if (cache.hidden[i] <= 0.f) dhidden[i] = 0.f;
    nn::linear_backward(head1_, layout_, params_, cache.input, dhidden, dinput, grads);
    return dinput;
}

float SiameseModel::head_score(const Eigen::VectorXf& sq_diff) const {
    HeadCache cache;
    return head_forward(sq_diff, cache);
}

float SiameseModel::predict_from_features(const Eigen::VectorXf& u, const Eigen::VectorXf& v) const {
    return sigmoidf(head_score(pointwise_sq_diff(u, v)));
}

Eigen::VectorXf pointwise_sq_diff(const Eigen::VectorXf& u, const Eigen::VectorXf& v) {
    if (u.size() != v.size()) throw std::invalid_argument("pointwise_sq_diff: dimension mismatch");
    return (u - v).array().square();
}

float predict_inconsistency(const SiameseModel& model, const ImageRaster& patch_i,
                            const ImageRaster& patch_j) {
    return model.predict_from_features(model.feature(patch_i), model.feature(patch_j));
}

double pair_loss(const std::vector<double>& p, const std::vector<int>& y) {
    if (p.size() != y.size() || p.empty()) throw std::invalid_argument("pair_loss: size mismatch");
    double sum = 0.;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pc = std::clamp(p[i], kProbClamp, 1. - kProbClamp);
        sum += y[i] ? -std::log(pc) : -std::log(1. - pc);
    }
    return sum / static_cast<double>(p.size());
}

// --- training ---

json TrainConfig::to_json() const {
    json j;
    j["backbone"] = backbone_name(backbone);
    j["mode"] = mode == PairMode::Clean ? "clean" : "jpeg";
    j["batch"] = batch;
    j["lr0"] = lr0;
    j["epochs"] = epochs;
    j["pairs_per_epoch"] = pairs_per_epoch;
    j["patience"] = patience;
    j["seed"] = seed;
    j["angles"] = angles;
    j["same_image_pairs"] = same_image_pairs;
    return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    c.backbone = parse_backbone(j.at("backbone").get<std::string>());
    c.mode = j.at("mode").get<std::string>() == "jpeg" ? PairMode::Jpeg : PairMode::Clean;
    c.batch = j.at("batch").get<int>();
    c.lr0 = j.at("lr0").get<float>();
    c.epochs = j.at("epochs").get<int>();
    c.pairs_per_epoch = j.at("pairs_per_epoch").get<int>();
    c.patience = j.at("patience").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.angles = j.at("angles").get<std::vector<int>>();
    c.same_image_pairs = j.at("same_image_pairs").get<bool>();
    return c;
}

float lr_at_epoch(float lr0, int epoch) {
    const int halvings = epoch > 30 ? (epoch - 30) / 5 : 0;
    return lr0 / static_cast<float>(1 << halvings);
}

TrainResult train(const TrainConfig& config, const std::vector<ImageRaster>& pool, std::ostream* log) {
    if (pool.empty()) throw std::invalid_argument("train: empty image pool");

    TrainResult result;
    result.model = SiameseModel::create(config.backbone, derive_seed(config.seed, 0xA11));
    SiameseModel& model = result.model;

    PairSampler sampler;
    sampler.angles = config.angles;
    sampler.same_image = config.same_image_pairs;

    // pair stream: per-index RNG, seed-stable validation split
    std::uint64_t pair_index = 0;
    auto draw_pair = [&](int label) {
        std::mt19937_64 rng = make_rng(derive_seed(config.seed, pair_index));
        ++pair_index;
        return sampler.sample_labeled(pool, config.mode, label, rng);
    };
    auto next_index_is_val = [&]() {
        return splitmix64(derive_seed(config.seed, pair_index) ^ 0x5a17ULL) % 10 == 0;
    };

    const int n_val = std::max(50, config.pairs_per_epoch / 10);
    std::vector<TrainingPair> val_pairs;
    val_pairs.reserve(n_val);
    {
        // consume validation-marked indices until the held-out set is full
        std::uint64_t scanned = 0;
        while (static_cast<int>(val_pairs.size()) < n_val && scanned < 1u << 22) {
            if (next_index_is_val())
                val_pairs.push_back(draw_pair(static_cast<int>(val_pairs.size()) % 2));
            else
                ++pair_index;
            ++scanned;
        }
    }
    // training consumes the remaining stream, skipping held-out indices
    auto next_train_pair = [&](int label) {
        while (next_index_is_val()) ++pair_index;
        return draw_pair(label);
    };

    std::vector<float> grads(model.layout().total(), 0.f);
    nn::Adam adam;
    adam.init(model.layout().total());

    const int steps_per_epoch = std::max(1, config.pairs_per_epoch / config.batch);

    auto evaluate_validation = [&](double& loss, double& acc) {
        std::vector<double> p(val_pairs.size());
        std::vector<int> y(val_pairs.size());
        int correct = 0;
        for (std::size_t i = 0; i < val_pairs.size(); ++i) {
            p[i] = predict_inconsistency(model, val_pairs[i].patch_a, val_pairs[i].patch_b);
            y[i] = val_pairs[i].label;
            correct += ((p[i] > 0.5) ? 1 : 0) == y[i];
        }
        loss = pair_loss(p, y);
        acc = static_cast<double>(correct) / static_cast<double>(val_pairs.size());
    };

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<float> best_params = model.params();
    int best_epoch = 0;

    SiameseModel::BackboneCache cache_a, cache_b;
    SiameseModel::HeadCache head_cache;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const float lr = lr_at_epoch(config.lr0, epoch);
        double epoch_loss = 0.;
        for (int step = 0; step < steps_per_epoch; ++step) {
            std::fill(grads.begin(), grads.end(), 0.f);
            double batch_loss = 0.;
            for (int s = 0; s < config.batch; ++s) {
                const int label = s % 2;  // half consistent, half inconsistent
                TrainingPair tp = next_train_pair(label);
                Eigen::VectorXf fa = model.feature_train(tp.patch_a, cache_a);
                Eigen::VectorXf fb = model.feature_train(tp.patch_b, cache_b);
                Eigen::VectorXf d = pointwise_sq_diff(fa, fb);
                const float z = model.head_forward(d, head_cache);
                const double p = 1. / (1. + std::exp(-static_cast<double>(z)));
                const double pc = std::clamp(p, kProbClamp, 1. - kProbClamp);
                batch_loss += label ? -std::log(pc) : -std::log(1. - pc);

                const float dz = static_cast<float>(p - label) / static_cast<float>(config.batch);
                Eigen::VectorXf dd = model.head_backward(dz, head_cache, grads);
                Eigen::VectorXf dfa = dd.cwiseProduct(2.f * (fa - fb));
                Eigen::VectorXf dfb = -dfa;
                model.backbone_backward(dfa, cache_a, grads);
                model.backbone_backward(dfb, cache_b, grads);
            }
            batch_loss /= config.batch;
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch));
            epoch_loss += batch_loss;
            adam.step(model.params(), grads, lr);
        }
        epoch_loss /= steps_per_epoch;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = epoch_loss;
        evaluate_validation(rec.val_loss, rec.val_accuracy);
        result.curve.push_back(rec);
        if (log) {
            json j;
            j["epoch"] = rec.epoch;
            j["lr"] = rec.lr;
            j["train_loss"] = rec.train_loss;
            j["val_loss"] = rec.val_loss;
            j["val_accuracy"] = rec.val_accuracy;
            (*log) << j.dump() << "\n";
        }

        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            best_params = model.params();
            best_epoch = epoch;
        } else if (epoch - best_epoch >= config.patience) {
            break;  // early stopping
        }
    }

    model.params() = best_params;
    result.best_epoch = best_epoch;
    model.metadata["config"] = config.to_json();
    model.metadata["seed"] = config.seed;
    model.metadata["epochs_run"] = static_cast<int>(result.curve.size());
    model.metadata["best_epoch"] = best_epoch;
    model.metadata["final_train_loss"] = result.curve.empty() ? 0. : result.curve.back().train_loss;
    model.metadata["best_val_loss"] = best_val;
    return result;
}

// --- checkpoints ---

namespace {

constexpr char kCheckpointMagic[4] = {'H', 'S', 'C', 'K'};

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& f, T& v) {
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw std::runtime_error("checkpoint truncated");
}

}  // namespace

void save_checkpoint(const std::string& path, const SiameseModel& model) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f.write(kCheckpointMagic, 4);
    write_pod(f, std::uint32_t{1});  // version
    json meta = model.metadata;
    meta["backbone_kind"] = backbone_name(model.kind());
    const std::string mstr = meta.dump();
    write_pod(f, static_cast<std::uint32_t>(mstr.size()));
    f.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
    const auto& entries = model.layout().entries();
    write_pod(f, static_cast<std::uint32_t>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        write_pod(f, static_cast<std::uint16_t>(e.name.size()));
        f.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_pod(f, static_cast<std::uint32_t>(e.rows));
        write_pod(f, static_cast<std::uint32_t>(e.cols));
        f.write(reinterpret_cast<const char*>(model.params().data() + e.offset),
                static_cast<std::streamsize>(sizeof(float) * e.rows * e.cols));
    }
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

SiameseModel load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    std::uint32_t version = 0, meta_len = 0;
    read_pod(f, version);
    if (version != 1) throw std::runtime_error("unsupported checkpoint version");
    read_pod(f, meta_len);
    std::string mstr(meta_len, '\0');
    f.read(mstr.data(), meta_len);
    if (!f) throw std::runtime_error("checkpoint truncated");
    json meta = json::parse(mstr);

    SiameseModel model = SiameseModel::create(parse_backbone(meta.at("backbone_kind").get<std::string>()), 0);
    model.metadata = meta;
    std::uint32_t n_tensors = 0;
    read_pod(f, n_tensors);
    const auto& entries = model.layout().entries();
    if (n_tensors != entries.size())
        throw std::runtime_error("checkpoint tensor count does not match backbone_kind");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        std::uint16_t name_len = 0;
        read_pod(f, name_len);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        std::uint32_t rows = 0, cols = 0;
        read_pod(f, rows);
        read_pod(f, cols);
        const auto& e = entries[i];
        if (!f || name != e.name || rows != static_cast<std::uint32_t>(e.rows) ||
            cols != static_cast<std::uint32_t>(e.cols))
            throw std::runtime_error("checkpoint tensor mismatch at " + name);
        f.read(reinterpret_cast<char*>(model.params().data() + e.offset),
               static_cast<std::streamsize>(sizeof(float) * e.rows * e.cols));
        if (!f) throw std::runtime_error("checkpoint truncated at tensor " + name);
    }
    return model;
}

}  // namespace huemod
