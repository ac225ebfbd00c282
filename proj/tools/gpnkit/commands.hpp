#pragma once

#include <string>
#include <vector>

#include "run_config.hpp"

namespace gpnkit::cli {

struct VerifyOptions {
    std::string suite = "conjugate";
    bool negative_control = false;
};

struct FigureOptions {
    std::string kind = "posterior_band";
    std::vector<std::string> inputs;
};

struct EvalOptions {
    std::string checkpoint;
};

int run_train(const GlobalOptions& g);
int run_eval(const GlobalOptions& g, const EvalOptions& e);
int run_verify(const GlobalOptions& g, const VerifyOptions& v);
int run_figure(const GlobalOptions& g, const FigureOptions& f);

}  // namespace gpnkit::cli
