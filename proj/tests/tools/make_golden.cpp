// Writes the golden baseline report for the default synthetic corpus. Every
// number is computed by the literal oracles, not by the library's metrics.

#include <fstream>
#include <iostream>

#include "oracles/oracles.hpp"
#include "srr/ingest.hpp"
#include "srr/synth.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_golden OUTPUT.json\n";
        return 1;
    }
    const srr::CorpusOptions options;  // 73 households, 28 days, seed 2020
    const auto corpus = srr::make_synthetic_corpus(options);
    std::map<std::string, std::string> regions;
    for (const auto& h : corpus) regions[h.series.household_id] = h.region;
    const auto split = srr::make_split(regions, {{"CA", 15}, {"NY", 18}, {"TX", 0}}, options.seed);

    std::vector<oracle::Scored> scored;
    for (const auto& h : corpus) {
        if (split.is_train(h.series.household_id)) continue;
        const auto& truth = h.series.values;
        scored.push_back({h.region, truth, oracle::repeat_quarters(oracle::block_sums(truth, 4), 4)});
    }
    const auto doc = oracle::pooled_report(scored, "baseline", {1, 3, 6}, 4, 1e-6, 4);
    std::ofstream(argv[1]) << doc.dump(2) << '\n';
    std::cout << "wrote " << scored.size() << " test series to " << argv[1] << '\n';
    return 0;
}
