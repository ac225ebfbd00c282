#include "commands.hpp"
#include "svg.hpp"

namespace gpnkit::cli {

namespace {

std::vector<double> col(const Table& t, const std::string& name) {
    const Index j = t.column(name);
    return {t.values.col(j).data(), t.values.col(j).data() + t.values.rows()};
}

std::string label_of(const std::string& dir) {
    const auto p = fs::path(dir);
    const auto name = p.filename().empty() ? p.parent_path().filename() : p.filename();
    return name.string();
}

/// Concatenates per-input tables, prefixing an `input` index column.
std::string merged_csv(const std::vector<Table>& tables) {
    std::string s = "input";
    for (const auto& h : tables.front().header) s += "," + h;
    s += "\n";
    for (std::size_t k = 0; k < tables.size(); ++k) {
        if (tables[k].header != tables.front().header) throw DataError("figure inputs have different columns");
        for (Index i = 0; i < tables[k].values.rows(); ++i) {
            s += std::to_string(k);
            for (Index j = 0; j < tables[k].values.cols(); ++j) s += "," + num(tables[k].values(i, j));
            s += "\n";
        }
    }
    return s;
}

std::vector<Panel> band_panels(const std::vector<std::string>& inputs, std::vector<Table>& tables) {
    std::vector<Panel> panels;
    for (const auto& dir : inputs) {
        const Table t = read_table((fs::path(dir) / "posterior_band.csv").string());
        Panel p;
        p.title = label_of(dir);
        p.xlabel = "x";
        p.ylabel = "f(x)";
        p.bands.push_back({col(t, "x"), col(t, "lower"), col(t, "upper"), "#1f77b4"});
        p.series.push_back({col(t, "x"), col(t, "mean"), "posterior mean", "#1f77b4"});
        p.series.push_back({col(t, "x"), col(t, "truth"), "true function", "#444444", true});
        const auto obs_path = (fs::path(dir) / "observations.csv").string();
        if (fs::exists(obs_path)) {
            const Table o = read_table(obs_path);
            Series s{col(o, "x"), col(o, "y"), "observations", "#d62728"};
            s.line = false;
            p.series.push_back(s);
        }
        panels.push_back(std::move(p));
        tables.push_back(t);
    }
    return panels;
}

Panel roc_panel(const std::vector<std::string>& inputs, std::vector<Table>& tables) {
    Panel p;
    p.title = "OOD detection by posterior variance";
    p.xlabel = "false positive rate";
    p.ylabel = "true positive rate";
    p.xlim = p.ylim = std::make_pair(0.0, 1.0);
    Series chance{{0.0, 1.0}, {0.0, 1.0}, "", "#999999", true};
    p.series.push_back(chance);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Table t = read_table((fs::path(inputs[k]) / "roc.csv").string());
        p.series.push_back({col(t, "fpr"), col(t, "tpr"), label_of(inputs[k]), palette(k)});
        tables.push_back(t);
    }
    return p;
}

Panel scaling_panel(const std::vector<std::string>& inputs, std::vector<Table>& tables) {
    Panel p;
    p.title = "OOD AUC against training time";
    p.xlabel = "training seconds";
    p.ylabel = "AUC";
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Table t = read_table((fs::path(inputs[k]) / "scaling.csv").string());
        Series s{col(t, "seconds"), col(t, "auc"), label_of(inputs[k]), palette(k)};
        s.markers = true;
        p.series.push_back(s);
        tables.push_back(t);
    }
    return p;
}

}  // namespace

int run_figure(const GlobalOptions& g, const FigureOptions& f) {
    if (!g.config.empty()) throw ConfigError("figure takes no config file");
    if (f.inputs.empty()) throw DataError("figure needs at least one --input directory");
    for (const auto& in : f.inputs)
        if (!fs::is_directory(in)) throw DataError("figure input '" + in + "' is not a directory");
    std::vector<Table> tables;
    std::vector<Panel> panels;
    if (f.kind == "posterior_band") panels = band_panels(f.inputs, tables);
    else if (f.kind == "roc") panels = {roc_panel(f.inputs, tables)};
    else if (f.kind == "scaling") panels = {scaling_panel(f.inputs, tables)};
    else throw ConfigError("unknown figure kind '" + f.kind + "' (posterior_band, roc, scaling)");

    const fs::path dir = prepare_out_dir(g.out);
    write_file(dir / (f.kind + ".svg"), render_svg(panels));
    write_file(dir / (f.kind + ".csv"), merged_csv(tables));
    std::cout << (dir / (f.kind + ".svg")).string() << "\n";
    return 0;
}

}  // namespace gpnkit::cli
