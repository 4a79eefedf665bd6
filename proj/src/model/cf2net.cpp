#include "model/cf2net.hpp"

#include "common/errors.hpp"

namespace cf2net {

using nn::Node;

Cf2Net::Cf2Net(const ModelConfig& config, uint64_t init_seed) : config_(config) {
    config_.validate();
    graph_ = std::make_unique<nn::Graph>(init_seed);
    build();
}

namespace {

// conv -> batch norm -> relu
Node* cbr(nn::Graph& g, Node* x, int out_c, int k, int dilation, const std::string& name) {
    Node* c = g.conv(x, out_c, k, dilation, name);
    return g.relu(g.bn(c, name + ".bn"));
}

// Three consecutive 3x3 convolutions, each with batch norm and relu.
Node* triple_conv(nn::Graph& g, Node* x, int out_c, const std::string& prefix) {
    Node* h = cbr(g, x, out_c, 3, 1, prefix + ".conv1");
    h = cbr(g, h, out_c, 3, 1, prefix + ".conv2");
    return cbr(g, h, out_c, 3, 1, prefix + ".conv3");
}

}  // namespace

void Cf2Net::build() {
    nn::Graph& g = *graph_;
    const int bw = config_.base_width;
    const int fw = config_.fsp_width;

    input_ = g.input(config_.input_channels());

    // Encoder: E^i at scale i, pooling feeds the next block.
    Node* h = input_;
    for (int i = 1; i <= 4; ++i) {
        const int c = bw << (i - 1);
        enc_[i - 1] = triple_conv(g, h, c, "backbone.enc." + std::to_string(i));
        h = g.maxpool2(enc_[i - 1]);
    }
    mid_ = triple_conv(g, h, bw * 16, "backbone.mid");

    // Decoder: D^i at scale i, built from the deeper features.
    Node* up = mid_;
    for (int i = 4; i >= 1; --i) {
        const int c = bw << (i - 1);
        Node* x = g.upsample(up, 2);
        if (config_.backbone_skips) x = g.concat({x, enc_[i - 1]});
        dec_[i - 1] = triple_conv(g, x, c, "backbone.dec." + std::to_string(i));
        up = dec_[i - 1];
    }

    if (config_.use_fsp) {
        // Modules run coarse to fine; the first consumes the middle block.
        Node* prev = mid_;
        for (int i = 4; i >= 1; --i) {
            const std::string p = "fsp." + std::to_string(i);
            Node* a_enc = enc_[i - 1];
            Node* a_dec = dec_[i - 1];
            if (config_.use_aspp) {
                auto aspp = [&](Node* x, const std::string& name) {
                    std::vector<Node*> branches;
                    for (int rate : config_.aspp_rates) {
                        Node* c = g.conv(x, x->channels(), 3, rate,
                                         name + ".rate" + std::to_string(rate));
                        branches.push_back(g.relu(c));
                    }
                    return g.add(branches);
                };
                a_enc = aspp(a_enc, p + ".aspp.enc");
                a_dec = aspp(a_dec, p + ".aspp.dec");
            }

            // Cascade fusion: upsampled previous output against the
            // projected same-scale encoder/decoder features.
            Node* b1 = g.bn(g.conv(g.upsample(prev, 2), fw, 3, 2, p + ".cff.up"),
                            p + ".cff.up.bn");
            Node* pe = g.conv(a_enc, fw, 1, 1, p + ".cff.proj_enc");
            Node* pd = g.conv(a_dec, fw, 1, 1, p + ".cff.proj_dec");
            Node* fused = g.relu(g.conv(g.concat({b1, pe, pd}), fw, 3, 1, p + ".cff.fuse"));

            Node* tiny_in = fused;
            if (config_.use_ec) {
                Node* t = cbr(g, fused, fw, 1, 1, p + ".ec.conv1");
                t = cbr(g, t, fw, 3, 1, p + ".ec.conv2");
                Node* branch = cbr(g, t, fw, 1, 1, p + ".ec.branch");
                tiny_in = g.concat({branch, fused});
                em_[i - 1] = g.conv(t, config_.em_channels, 1, 1, p + ".ec.em");
            }

            // Tiny U-Net: one pool/upsample level plus a fusing convolution.
            Node* c1 = cbr(g, tiny_in, fw, 3, 1, p + ".tiny.conv1");
            Node* c2 = cbr(g, g.maxpool2(c1), fw, 3, 1, p + ".tiny.conv2");
            Node* c3 = cbr(g, g.upsample(c2, 2), fw, 3, 1, p + ".tiny.conv3");
            fsp_[i - 1] = cbr(g, g.concat({c3, tiny_in}), fw, 3, 1, p + ".tiny.fuse");
            prev = fsp_[i - 1];
        }

        fusion_ = g.sigmoid(g.conv(fsp_[0], 1, 1, 1, "head.fusion"));
        if (config_.use_ec) {
            std::vector<Node*> upsampled;
            for (int i = 1; i <= 4; ++i) upsampled.push_back(g.upsample(em_[i - 1], 1 << (i - 1)));
            edge_ = g.sigmoid(g.conv(g.concat(upsampled), 1, 1, 1, "head.edge"));
        }
    }

    aux_ = g.sigmoid(g.conv(dec_[0], 1, 1, 1, "head.aux"));
}

void Cf2Net::forward(const nn::Tensor& batch, bool training) {
    if (batch.c != config_.input_channels())
        throw ShapeError("forward: expected " + std::to_string(config_.input_channels()) +
                         " input channels, got " + std::to_string(batch.c));
    if (batch.h != batch.w || batch.h % 16 != 0)
        throw ShapeError("forward: input must be square with side a multiple of 16");
    graph_->set_input(input_, batch);
    graph_->forward(training);
}

void Cf2Net::backward(const nn::Tensor* d_fusion, const nn::Tensor* d_aux,
                      const nn::Tensor* d_edge) {
    std::vector<std::pair<Node*, const nn::Tensor*>> seeds;
    if (d_fusion) {
        if (!fusion_) throw ConfigError("backward: model has no fusion head");
        seeds.emplace_back(fusion_, d_fusion);
    }
    if (d_aux) seeds.emplace_back(aux_, d_aux);
    if (d_edge) {
        if (!edge_) throw ConfigError("backward: model has no edge head");
        seeds.emplace_back(edge_, d_edge);
    }
    graph_->backward(seeds);
}

PredictionSet Cf2Net::predictions() const {
    PredictionSet p;
    if (fusion_) p.fusion = &fusion_->out();
    p.aux = &aux_->out();
    if (edge_) p.edge = &edge_->out();
    for (int i = 0; i < 4; ++i)
        if (em_[i]) p.em[i] = &em_[i]->out();
    return p;
}

const nn::Tensor& Cf2Net::encoder_features(int scale) const {
    return enc_.at(scale - 1)->out();
}

const nn::Tensor& Cf2Net::middle_features() const { return mid_->out(); }

const nn::Tensor& Cf2Net::decoder_features(int scale) const {
    return dec_.at(scale - 1)->out();
}

const nn::Tensor& Cf2Net::fsp_features(int scale) const {
    if (!fsp_.at(scale - 1)) throw ConfigError("fusion stream is disabled");
    return fsp_.at(scale - 1)->out();
}

}  // namespace cf2net
