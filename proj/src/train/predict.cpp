#include "train/predict.hpp"

#include "common/errors.hpp"
#include "common/png_io.hpp"
#include "data/dataset.hpp"

namespace cf2net {

PredictResult predict_image(LoadedCheckpoint& checkpoint, const Plane& raw_image) {
    const ModelConfig& cfg = checkpoint.config;
    const int S = cfg.size;

    Plane image = resize_bilinear(raw_image, S, S);
    minmax_normalize(image);

    nn::Tensor batch(1, cfg.input_channels(), S, S);
    std::copy(image.v.begin(), image.v.end(), batch.at(0, 0));
    if (cfg.use_superpixel) {
        SuperpixelParams spx;
        if (checkpoint.meta.contains("superpixel")) {
            const auto& j = checkpoint.meta["superpixel"];
            spx.k = j.value("k", spx.k);
            spx.compactness = j.value("compactness", spx.compactness);
            spx.iterations = j.value("iterations", spx.iterations);
            spx.min_size = j.value("min_size", spx.min_size);
        }
        Plane channel = superpixel_channel(image, spx);
        std::copy(channel.v.begin(), channel.v.end(), batch.at(0, 1));
    }

    checkpoint.model->forward(batch, false);
    const nn::Tensor& prob = checkpoint.model->predictions().primary();

    PredictResult out;
    out.mask_prob = Plane(S, S);
    std::copy(prob.data(), prob.data() + prob.count(), out.mask_prob.v.begin());
    out.mask = out.mask_prob;
    threshold_binarize(out.mask, 0.5f);

    if (checkpoint.model->has_edge_head()) {
        const nn::Tensor& edge = *checkpoint.model->predictions().edge;
        out.edge_prob = Plane(S, S);
        std::copy(edge.data(), edge.data() + edge.count(), out.edge_prob.v.begin());
    }

    out.overlay_r = image;
    out.overlay_g = image;
    out.overlay_b = image;
    for (auto [y, x] : boundary_pixels(out.mask)) {
        out.overlay_r.at(y, x) = 1.f;
        out.overlay_g.at(y, x) = 0.f;
        out.overlay_b.at(y, x) = 0.f;
    }
    return out;
}

void predict_to_files(LoadedCheckpoint& checkpoint, const std::filesystem::path& image_png,
                      const std::filesystem::path& out_dir) {
    Plane raw = read_png_gray(image_png);
    PredictResult r = predict_image(checkpoint, raw);
    std::filesystem::create_directories(out_dir);
    write_png_gray(out_dir / "mask.png", r.mask);
    write_png_gray(out_dir / "mask_prob.png", r.mask_prob);
    if (r.edge_prob.size() > 0) write_png_gray(out_dir / "edge.png", r.edge_prob);
    write_png_rgb(out_dir / "overlay.png", r.overlay_r, r.overlay_g, r.overlay_b);
}

}  // namespace cf2net
