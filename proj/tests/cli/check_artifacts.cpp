// Property checks on files written by the gpnkit command-line tool.
//   check_artifacts band DIR            band narrower at observations than at the ends
//   check_artifacts roc DIR             ROC starts at (0,0) and ends at (1,1)
//   check_artifacts metric DIR NAME V   metrics.csv reports NAME = V
//   check_artifacts same FILE FILE      byte-identical files

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace {

using Columns = std::map<std::string, std::vector<double>>;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::istringstream s(line);
    for (std::string c; std::getline(s, c, ',');) cells.push_back(c);
    return cells;
}

Columns read_columns(const std::string& path) {
    std::istringstream in(slurp(path));
    std::string line;
    std::getline(in, line);
    const auto header = split(line);
    Columns cols;
    while (std::getline(in, line)) {
        const auto cells = split(line);
        for (std::size_t j = 0; j < header.size() && j < cells.size(); ++j) cols[header[j]].push_back(std::stod(cells[j]));
    }
    return cols;
}

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (x <= xs[i]) {
            const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            return ys[i - 1] + t * (ys[i] - ys[i - 1]);
        }
    return ys.back();
}

bool band(const std::string& dir) {
    auto b = read_columns(dir + "/posterior_band.csv");
    auto o = read_columns(dir + "/observations.csv");
    std::vector<double> width;
    for (std::size_t i = 0; i < b["x"].size(); ++i) width.push_back(b["upper"][i] - b["lower"][i]);
    double at_obs = 0.0;
    for (double x : o["x"]) at_obs += interpolate(b["x"], width, x) / static_cast<double>(o["x"].size());
    const double at_ends = 0.5 * (width.front() + width.back());
    std::cout << "mean band width at observations " << at_obs << ", at the ends " << at_ends << '\n';
    return at_obs < at_ends;
}

bool roc(const std::string& dir) {
    auto r = read_columns(dir + "/roc.csv");
    const auto &f = r["fpr"], &t = r["tpr"];
    std::cout << "first (" << f.front() << "," << t.front() << ") last (" << f.back() << "," << t.back() << ")\n";
    return f.front() == 0.0 && t.front() == 0.0 && f.back() == 1.0 && t.back() == 1.0;
}

bool metric(const std::string& dir, const std::string& name, double expected) {
    std::istringstream in(slurp(dir + "/metrics.csv"));
    for (std::string line; std::getline(in, line);) {
        const auto cells = split(line);
        if (cells.size() == 2 && cells[0] == name) {
            std::cout << name << " = " << cells[1] << '\n';
            return std::stod(cells[1]) == expected;
        }
    }
    std::cout << name << " not found\n";
    return false;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::string> a(argv + 1, argv + argc);
    try {
        bool ok = false;
        if (a.size() == 2 && a[0] == "band") ok = band(a[1]);
        else if (a.size() == 2 && a[0] == "roc") ok = roc(a[1]);
        else if (a.size() == 4 && a[0] == "metric") ok = metric(a[1], a[2], std::stod(a[3]));
        else if (a.size() == 3 && a[0] == "same") ok = slurp(a[1]) == slurp(a[2]);
        else {
            std::cerr << "usage: check_artifacts band|roc|metric|same ...\n";
            return 2;
        }
        std::cout << (ok ? "ok\n" : "check failed\n");
        return ok ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
}
