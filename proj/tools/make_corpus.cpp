// Writes the bundled data files: the two-state example MDP, the four-atom
// distribution, and seeded random balanced MDPs with a manifest of seeds.

#include "diatomic/diatomic.hpp"

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace diatomic;

Mdp fig1() {
    std::vector<double> p(8, 0.0);
    std::vector<double> r(8, 0.0);
    auto at = [](std::size_t x, std::size_t a, std::size_t y) { return (x * 2 + a) * 2 + y; };
    const double r1[2] = {1.0, 2.0};
    const double r2[2] = {0.5, 2.5};
    for (std::size_t x = 0; x < 2; ++x) {
        p[at(x, 0, x)] = 1.0;
        r[at(x, 0, x)] = r1[x];
        for (std::size_t y = 0; y < 2; ++y) {
            p[at(x, 1, y)] = 0.5;
            r[at(x, 1, y)] = r2[x];
        }
    }
    return Mdp(2, 2, std::move(p), std::move(r), 0.5, {"x1", "x2"}, {"a1", "a2"});
}

} // namespace

int main(int argc, char** argv) {
    const std::filesystem::path dir = argc > 1 ? argv[1] : "data";
    std::filesystem::create_directories(dir);
    save_json((dir / "fig1.json").string(), mdp_to_json(fig1()));
    save_json((dir / "fig4_dist.json").string(),
              dist_to_json(DiscreteDist({{-5.0, 0.2}, {-1.0, 0.4}, {4.0, 0.2}, {8.0, 0.2}})));

    Json manifest = Json::array();
    auto emit = [&](std::size_t n_states, std::uint64_t seed) {
        Rng rng(seed);
        const Mdp mdp = random_balanced_mdp(rng, n_states, 2);
        const std::string name = "random_" + std::to_string(n_states) + "s_seed" + std::to_string(seed) + ".json";
        save_json((dir / name).string(), mdp_to_json(mdp));
        manifest.push_back({{"file", name}, {"states", n_states}, {"actions", 2}, {"seed", seed}});
    };
    for (std::uint64_t seed = 1; seed <= 20; ++seed) emit(2, seed);
    for (std::uint64_t seed = 101; seed <= 105; ++seed) emit(3, seed);
    save_json((dir / "corpus.json").string(), manifest);
    std::cout << "wrote " << manifest.size() + 2 << " files to " << dir.string() << "\n";
    return 0;
}
