#include "model/config.hpp"

#include "common/errors.hpp"

namespace cf2net {

void ModelConfig::validate() const {
    if (base_width < 1) throw ConfigError("model: base_width must be >= 1");
    if (fsp_width < 1) throw ConfigError("model: fsp_width must be >= 1");
    if (em_channels < 1) throw ConfigError("model: em_channels must be >= 1");
    if (size <= 0 || size % 16 != 0)
        throw ConfigError("model: size must be a positive multiple of 16");
    if (aspp_rates.empty()) throw ConfigError("model: aspp_rates must be nonempty");
    for (int r : aspp_rates)
        if (r < 1) throw ConfigError("model: aspp_rates must be positive");
    if ((use_aspp || use_ec) && !use_fsp)
        throw ConfigError("model: use_aspp/use_ec require use_fsp");
}

nlohmann::json ModelConfig::to_json() const {
    return {{"base_width", base_width},
            {"fsp_width", fsp_width},
            {"em_channels", em_channels},
            {"aspp_rates", aspp_rates},
            {"use_fsp", use_fsp},
            {"use_aspp", use_aspp},
            {"use_ec", use_ec},
            {"use_superpixel", use_superpixel},
            {"backbone_skips", backbone_skips},
            {"size", size},
            {"input_channels", input_channels()}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.base_width = j.value("base_width", c.base_width);
    c.fsp_width = j.value("fsp_width", c.fsp_width);
    c.em_channels = j.value("em_channels", c.em_channels);
    if (j.contains("aspp_rates")) c.aspp_rates = j.at("aspp_rates").get<std::vector<int>>();
    c.use_fsp = j.value("use_fsp", c.use_fsp);
    c.use_aspp = j.value("use_aspp", c.use_aspp);
    c.use_ec = j.value("use_ec", c.use_ec);
    c.use_superpixel = j.value("use_superpixel", c.use_superpixel);
    c.backbone_skips = j.value("backbone_skips", c.backbone_skips);
    c.size = j.value("size", c.size);
    return c;
}

}  // namespace cf2net
