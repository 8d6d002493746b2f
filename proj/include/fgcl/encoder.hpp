#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgcl/augment.hpp"
#include "fgcl/matrix.hpp"
#include "fgcl/token_embed.hpp"

namespace fgcl {

// One message-passing layer: h'_v = ReLU(W_self h_v + W_nbr mean_u h_u
//   + W_edge mean_e x_e + b), neighbors/edges taken over both directions;
// empty neighborhoods contribute zero vectors.
struct EncoderLayer {
    Matrix w_self;  // d_l x d_{l-1}
    Matrix w_nbr;   // d_l x d_{l-1}
    Matrix w_edge;  // d_l x d_e
    Vec bias;       // d_l

    bool operator==(const EncoderLayer&) const = default;
};

struct EncoderParams {
    std::vector<EncoderLayer> layers;
    uint32_t edge_dim = 16;

    std::size_t input_dim() const { return layers.front().w_self.cols; }
    std::size_t output_dim() const { return layers.back().w_self.rows; }
    bool operator==(const EncoderParams&) const = default;
};

// Glorot-uniform matrices (±sqrt(6/(fan_in+fan_out))), zero biases; seeded.
EncoderParams init_encoder(const std::vector<uint32_t>& dims, uint32_t edge_dim, uint64_t seed);

// Mean readout over final node states, L2-normalized. Output is always
// unit-norm and finite; a degenerate all-zero readout maps to e_0.
Vec encode(const EncoderParams& params, const FeaturedGraph& fg);

// Untrained reference: mean of node feature rows, L2-normalized.
Vec baseline_embed(const FeaturedGraph& fg);

// NT-Xent over two views of N unit-normalized embeddings. For each of the 2N
// anchors the positive is its counterpart; candidates are all 2N-1 non-self
// rows. Returns the mean per-anchor loss. Throws BatchTooSmallError if N < 2.
double ntxent_loss(const std::vector<Vec>& view_a, const std::vector<Vec>& view_b, double tau);

using EncoderGrads = std::vector<EncoderLayer>;
EncoderGrads zero_grads(const EncoderParams& params);

// Full backward pass: NT-Xent through encode for both views. Returns the loss
// and accumulates gradients for every parameter into `grads`.
double loss_gradients(const EncoderParams& params, const std::vector<FeaturedGraph>& batch_a,
                      const std::vector<FeaturedGraph>& batch_b, double tau, EncoderGrads& grads);

struct TrainConfig {
    uint32_t batch_size = 32;
    double temperature = 0.5;
    uint32_t epochs = 12;
    double lr = 0.05;
    uint64_t seed = 42;
    std::vector<uint32_t> hidden_dims = {128, 128};
    AugmentConfig augment;
};

struct TrainResult {
    EncoderParams params;
    std::vector<double> epoch_loss;
};

// One-sided contrastive training: view A is the original featured graph, view
// B its augmented counterpart; per epoch the corpus is shuffled and split into
// batches of batch_size (short tail dropped), one SGD step per batch.
TrainResult train_gcl(const std::vector<MathGraph>& graphs, const LabelFeatures& feats,
                      const TrainConfig& cfg, uint32_t edge_dim);
TrainResult train_gcl(const std::vector<MathGraph>& graphs, const EmbeddingTable& table,
                      const TrainConfig& cfg, uint32_t edge_dim);

struct Checkpoint {
    EncoderParams params;
    TrainConfig config;
    std::vector<double> loss_history;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Stable identity of a parameter set (CRC of its serialized matrices); equal
// for a checkpoint before save and after load.
std::string checkpoint_id(const EncoderParams& params);

}  // namespace fgcl
