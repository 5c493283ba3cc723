#include <stdexcept>

#include "exnet/models/slowfast.hpp"
#include "exnet/models/x3d.hpp"
#include "exnet/nn/network.hpp"

namespace exnet::nn {

std::unique_ptr<Network> build_network(const std::string& arch, const nlohmann::json& config) {
    using models::SlowFast;
    using models::SlowFastConfig;
    using models::X3D;
    using models::X3DConfig;
    if (arch == "slowfast_r50")
        return std::make_unique<SlowFast>(SlowFastConfig::from_json(50, config));
    if (arch == "slowfast_r101")
        return std::make_unique<SlowFast>(SlowFastConfig::from_json(101, config));
    if (arch == "x3d" || arch == "x3d_s" || arch == "x3d_m")
        return std::make_unique<X3D>(X3DConfig::from_json(arch, config));
    throw std::invalid_argument("unknown architecture '" + arch + "'; known: slowfast_r50, " +
                                "slowfast_r101, x3d, x3d_s, x3d_m");
}

std::vector<std::string> registered_archs() {
    return {"slowfast_r50", "slowfast_r101", "x3d", "x3d_s", "x3d_m"};
}

}  // namespace exnet::nn
