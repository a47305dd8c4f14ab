#pragma once

#include "rflab/heatkernel.hpp"

#include <string>
#include <vector>

namespace rflab {

/// Container format: versioned text header (comma-separated key,value lines)
/// followed by a raw little-endian float64 payload per section. One flow
/// section, then any number of kernel sections. See docs/container-format.md.
struct Container {
  FlowHistory flow;
  std::vector<KernelHistory> kernels;
};

void write_container(const std::string& path, const FlowHistory& flow,
                     const std::vector<KernelHistory>& kernels = {});
Container read_container(const std::string& path);

std::string curve_to_csv(const struct EntropyCurve& curve);

}  // namespace rflab
