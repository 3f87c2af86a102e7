// Writes a synthetic multi-domain dataset in the on-disk layout the pipeline reads.

#include <iostream>

#include "CLI11.hpp"

#include "boxprompt/storage.hpp"
#include "boxprompt/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate a synthetic dataset of ellipse targets with speckled coarse maps", "boxprompt-synth"};

    boxprompt::SyntheticDatasetSpec spec;
    std::string out;
    std::string domains = "A,B,C,D,E,F";
    app.add_option("--out", out, "Dataset root to create")->required();
    app.add_option("--domains", domains, "Comma-separated domain labels");
    app.add_option("--cases", spec.cases_per_domain, "Cases per domain")->check(CLI::NonNegativeNumber);
    app.add_option("--size", spec.size, "Tile edge in pixels")->check(CLI::PositiveNumber);
    app.add_option("--seed", spec.seed, "Generator seed");
    app.add_option("--speckles", spec.noise.speckle_count, "Speckles per coarse map")->check(CLI::NonNegativeNumber);
    app.add_option("--speckle-size", spec.noise.speckle_size, "Pixels per speckle")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    spec.domains.clear();
    std::string item;
    for (char c : domains + ",") {
        if (c == ',') {
            if (!item.empty()) spec.domains.push_back(item);
            item.clear();
        } else {
            item += c;
        }
    }
    try {
        boxprompt::write_dataset(out, boxprompt::make_synthetic_dataset(spec));
    } catch (const boxprompt::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.category() == boxprompt::ErrorCategory::Io ? 2 : 1;
    }
    return 0;
}
