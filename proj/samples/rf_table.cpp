// Prints receptive-field geometry of the default architecture, with and without S2/C3.
#include <cstdio>

#include "fcnad/netcore.hpp"
#include "fcnad/rfgeom.hpp"

int main() {
    fcnad::DefaultNetworkOptions options;
    options.include_deep_layers = true;
    const auto net = fcnad::default_network(1, options);
    for (const auto& g : fcnad::geometry_table(net)) {
        std::printf("%-6s size %3lldx%-3lld jump %2lld offset %lld\n", g.layer.c_str(),
                    static_cast<long long>(g.size_h), static_cast<long long>(g.size_w),
                    static_cast<long long>(g.jump), static_cast<long long>(g.offset_y));
    }
}
