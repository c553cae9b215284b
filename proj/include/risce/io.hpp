#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "risce/experiment.hpp"

namespace risce {

// All numeric text goes through to_chars/from_chars: locale-independent,
// shortest representation that round-trips exactly.

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

inline std::string format_int(long long v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

inline double parse_double(std::string_view text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw config_error("not a number: '" + std::string(text) + "'");
    return v;
}

inline long long parse_int(std::string_view text) {
    long long v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw config_error("not an integer: '" + std::string(text) + "'");
    return v;
}

inline std::uint64_t parse_uint(std::string_view text) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw config_error("not an unsigned integer: '" + std::string(text) + "'");
    return v;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::vector<std::string_view> split_char(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

} // namespace detail

inline constexpr std::string_view config_header = "risce-config v1";

inline const char* align_mode_name(AlignMode m) {
    switch (m) {
    case AlignMode::diagonal_ls: return "diagonal_ls";
    case AlignMode::first_row_normalization: return "first_row_normalization";
    case AlignMode::pilot_ls: return "pilot_ls";
    }
    throw config_error("align_mode_name: unknown mode");
}

inline AlignMode align_mode_from_name(std::string_view name) {
    if (name == "diagonal_ls") return AlignMode::diagonal_ls;
    if (name == "first_row_normalization") return AlignMode::first_row_normalization;
    throw config_error("unknown alignment mode: '" + std::string(name) + "'");
}

/// Renders a config as the flat versioned key/value document parse_config
/// reads back.
inline std::string write_config(const ExperimentConfig& cfg) {
    std::string out{config_header};
    out += "\n";
    auto kv = [&out](std::string_view key, const std::string& value) {
        out += key;
        out += ' ';
        out += value;
        out += '\n';
    };
    kv("users", format_int(cfg.scene.users));
    kv("bs_antennas", format_int(cfg.scene.bs_antennas));
    kv("ris_elements", format_int(cfg.scene.ris_elements));
    kv("slots", format_int(cfg.scene.slots));
    kv("phase_configs", format_int(cfg.scene.phase_configs));
    kv("sparsity", format_double(cfg.scene.sparsity));
    kv("pilot_len", format_int(cfg.scene.pilot_len));
    kv("signal_var", format_double(cfg.scene.signal_var));
    kv("channel_var", format_double(cfg.scene.channel_var));
    std::string grid;
    for (double s : cfg.snr_grid_db) {
        if (!grid.empty()) grid += ' ';
        grid += format_double(s);
    }
    kv("snr_grid_db", grid);
    kv("trials", format_int(cfg.trials));
    std::string methods;
    for (Method m : cfg.methods) {
        if (!methods.empty()) methods += ' ';
        methods += method_name(m);
    }
    kv("methods", methods);
    kv("als_epsilon", format_double(cfg.als.epsilon));
    kv("als_max_iterations", format_int(cfg.als.max_iterations));
    kv("als_init", cfg.als.init == AlsOptions::Init::eigen ? "eigen" : "random");
    kv("als_random_seed", format_int(static_cast<long long>(cfg.als.random_init_seed)));
    kv("bigamp_epsilon", format_double(cfg.bigamp.epsilon));
    kv("bigamp_max_iterations", format_int(cfg.bigamp.max_iterations));
    kv("bigamp_damping", format_double(cfg.bigamp.damping));
    kv("bigamp_noise_var", format_double(cfg.bigamp.assumed_noise_var));
    kv("bigamp_variance_floor", format_double(cfg.bigamp.variance_floor));
    kv("alignment", align_mode_name(cfg.alignment));
    kv("master_seed", format_int(static_cast<long long>(cfg.master_seed)));
    kv("output_path", cfg.output_path);
    return out;
}

/// Parses the versioned key/value config document. Blank lines and
/// #-comments are skipped; unknown or repeated keys are errors so a typo
/// cannot silently change an experiment.
inline ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    bool saw_header = false;
    std::set<std::string> seen;
    for (std::string_view raw : detail::split_char(text, '\n')) {
        const std::string_view line = detail::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (!saw_header) {
            if (line != config_header)
                throw config_error("config must start with '" + std::string(config_header) + "'");
            saw_header = true;
            continue;
        }
        const std::size_t key_end = line.find_first_of(" \t");
        const std::string key{line.substr(0, key_end)};
        const std::string_view rest =
            key_end == std::string_view::npos ? std::string_view{} : detail::trim(line.substr(key_end));
        if (rest.empty()) throw config_error("config key '" + key + "' has no value");
        if (!seen.insert(key).second) throw config_error("duplicate config key '" + key + "'");
        const auto values = detail::split_ws(rest);

        auto single = [&]() -> std::string_view {
            if (values.size() != 1)
                throw config_error("config key '" + key + "' expects one value");
            return values[0];
        };
        if (key == "users") cfg.scene.users = parse_int(single());
        else if (key == "bs_antennas") cfg.scene.bs_antennas = parse_int(single());
        else if (key == "ris_elements") cfg.scene.ris_elements = parse_int(single());
        else if (key == "slots") cfg.scene.slots = parse_int(single());
        else if (key == "phase_configs") cfg.scene.phase_configs = parse_int(single());
        else if (key == "sparsity") cfg.scene.sparsity = parse_double(single());
        else if (key == "pilot_len") cfg.scene.pilot_len = parse_int(single());
        else if (key == "signal_var") cfg.scene.signal_var = parse_double(single());
        else if (key == "channel_var") cfg.scene.channel_var = parse_double(single());
        else if (key == "snr_grid_db") {
            cfg.snr_grid_db.clear();
            for (auto v : values) cfg.snr_grid_db.push_back(parse_double(v));
        } else if (key == "trials") cfg.trials = static_cast<int>(parse_int(single()));
        else if (key == "methods") {
            cfg.methods.clear();
            for (auto v : values) cfg.methods.push_back(method_from_name(std::string(v)));
        } else if (key == "als_epsilon") cfg.als.epsilon = parse_double(single());
        else if (key == "als_max_iterations") cfg.als.max_iterations = static_cast<int>(parse_int(single()));
        else if (key == "als_init") {
            const auto v = single();
            if (v == "eigen") cfg.als.init = AlsOptions::Init::eigen;
            else if (v == "random") cfg.als.init = AlsOptions::Init::random;
            else throw config_error("als_init must be 'eigen' or 'random'");
        } else if (key == "als_random_seed") cfg.als.random_init_seed = parse_uint(single());
        else if (key == "bigamp_epsilon") cfg.bigamp.epsilon = parse_double(single());
        else if (key == "bigamp_max_iterations") cfg.bigamp.max_iterations = static_cast<int>(parse_int(single()));
        else if (key == "bigamp_damping") cfg.bigamp.damping = parse_double(single());
        else if (key == "bigamp_noise_var") cfg.bigamp.assumed_noise_var = parse_double(single());
        else if (key == "bigamp_variance_floor") cfg.bigamp.variance_floor = parse_double(single());
        else if (key == "alignment") cfg.alignment = align_mode_from_name(single());
        else if (key == "master_seed") cfg.master_seed = parse_uint(single());
        else if (key == "output_path") cfg.output_path = std::string(rest);
        else throw config_error("unknown config key '" + key + "'");
    }
    if (!saw_header) throw config_error("empty config document");
    return cfg;
}

inline constexpr std::string_view results_csv_header =
    "method,snr_db,nmse_hr_db,nmse_hs_db,nmse_x_db,mean_als_iters,mean_bigamp_iters,"
    "trials_used,failures,wall_time";

inline std::string results_csv(const ResultTable& table) {
    std::string out{results_csv_header};
    out += '\n';
    for (const ResultRow& r : table.rows) {
        out += method_name(r.method);
        out += ',';
        out += format_double(r.snr_db);
        out += ',';
        out += format_double(r.nmse_hr_db);
        out += ',';
        out += format_double(r.nmse_hs_db);
        out += ',';
        out += format_double(r.nmse_x_db);
        out += ',';
        out += format_double(r.mean_als_iters);
        out += ',';
        out += format_double(r.mean_bigamp_iters);
        out += ',';
        out += format_int(r.trials_used);
        out += ',';
        out += format_int(r.failures);
        out += ',';
        out += format_double(r.wall_time);
        out += '\n';
    }
    return out;
}

inline ResultTable parse_results_csv(std::string_view text) {
    const auto lines = detail::split_char(text, '\n');
    if (lines.empty() || detail::trim(lines[0]) != results_csv_header)
        throw config_error("results CSV: bad or missing header");
    ResultTable table;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string_view line = detail::trim(lines[i]);
        if (line.empty()) continue;
        const auto f = detail::split_char(line, ',');
        if (f.size() != 10) throw config_error("results CSV: wrong field count");
        ResultRow r;
        r.method = method_from_name(std::string(f[0]));
        r.snr_db = parse_double(f[1]);
        r.nmse_hr_db = parse_double(f[2]);
        r.nmse_hs_db = parse_double(f[3]);
        r.nmse_x_db = parse_double(f[4]);
        r.mean_als_iters = parse_double(f[5]);
        r.mean_bigamp_iters = parse_double(f[6]);
        r.trials_used = static_cast<int>(parse_int(f[7]));
        r.failures = static_cast<int>(parse_int(f[8]));
        r.wall_time = parse_double(f[9]);
        table.rows.push_back(r);
    }
    return table;
}

inline constexpr std::string_view trials_csv_header =
    "trial,method,snr_db,ok,diverged,nmse_hr,nmse_hs,nmse_x,als_iters,bigamp_iters,seconds";

inline std::string trials_csv(const std::vector<TrialRecord>& records) {
    std::string out{trials_csv_header};
    out += '\n';
    for (const TrialRecord& r : records) {
        out += format_int(r.trial);
        out += ',';
        out += method_name(r.method);
        out += ',';
        out += format_double(r.snr_db);
        out += ',';
        out += r.ok ? '1' : '0';
        out += ',';
        out += r.diverged ? '1' : '0';
        out += ',';
        out += format_double(r.nmse_hr);
        out += ',';
        out += format_double(r.nmse_hs);
        out += ',';
        out += format_double(r.nmse_x);
        out += ',';
        out += format_int(r.als_iters);
        out += ',';
        out += format_int(r.bigamp_iters);
        out += ',';
        out += format_double(r.seconds);
        out += '\n';
    }
    return out;
}

namespace detail {

struct PanelSpec {
    const char* title;
    double ResultRow::* field;
};

inline const char* method_color(Method m) {
    switch (m) {
        case Method::proposed: return "#1f77b4";
        case Method::lskrf: return "#d62728";
        case Method::genie_ls: return "#2ca02c";
    }
    return "#000000";
}

} // namespace detail

/// Renders the table as a standalone SVG: one panel per NMSE metric, one
/// polyline per method, NaN cells leave gaps. Intended as a quick visual
/// check of the CSV, not a publication figure.
inline std::string results_svg(const ResultTable& table, const std::string& title = {}) {
    static constexpr detail::PanelSpec panels[] = {
        {"NMSE, RIS-to-users channel (dB)", &ResultRow::nmse_hr_db},
        {"NMSE, BS-to-RIS channel (dB)", &ResultRow::nmse_hs_db},
        {"NMSE, transmit signal (dB)", &ResultRow::nmse_x_db},
    };
    constexpr double width = 640, panel_h = 300, margin_l = 64, margin_r = 140, margin_v = 44;
    std::vector<Method> methods;
    std::vector<double> snrs;
    for (const ResultRow& r : table.rows) {
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
            methods.push_back(r.method);
        if (std::find(snrs.begin(), snrs.end(), r.snr_db) == snrs.end()) snrs.push_back(r.snr_db);
    }
    std::sort(snrs.begin(), snrs.end());
    const double total_h = panel_h * 3 + 20;

    std::string svg;
    auto num = [](double v) { return format_double(v); };
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
           num(total_h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty())
        svg += "<text x=\"" + num(width / 2) + "\" y=\"14\" text-anchor=\"middle\">" + title +
               "</text>\n";

    for (std::size_t pi = 0; pi < 3; ++pi) {
        const auto& panel = panels[pi];
        const double top = 20 + panel_h * static_cast<double>(pi) + margin_v / 2;
        const double bottom = 20 + panel_h * static_cast<double>(pi + 1) - margin_v / 2;
        const double left = margin_l, right = width - margin_r;

        double lo = 0.0, hi = 0.0;
        bool any = false;
        for (const ResultRow& r : table.rows) {
            const double v = r.*panel.field;
            if (!std::isfinite(v)) continue;
            lo = any ? std::min(lo, v) : v;
            hi = any ? std::max(hi, v) : v;
            any = true;
        }
        if (!any) { lo = -1.0; hi = 1.0; }
        if (hi - lo < 1.0) { hi += 0.5; lo -= 0.5; }
        const double pad = 0.05 * (hi - lo);
        lo -= pad; hi += pad;
        const double x_lo = snrs.front(), x_hi = snrs.size() > 1 ? snrs.back() : snrs.front() + 1;
        auto px = [&](double snr) { return left + (snr - x_lo) / (x_hi - x_lo) * (right - left); };
        auto py = [&](double v) { return bottom - (v - lo) / (hi - lo) * (bottom - top); };

        svg += "<text x=\"" + num(left) + "\" y=\"" + num(top - 8) + "\">" + panel.title +
               "</text>\n";
        svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(right - left) +
               "\" height=\"" + num(bottom - top) + "\" fill=\"none\" stroke=\"#999\"/>\n";
        for (double s : snrs) {
            svg += "<line x1=\"" + num(px(s)) + "\" y1=\"" + num(bottom) + "\" x2=\"" + num(px(s)) +
                   "\" y2=\"" + num(bottom + 4) + "\" stroke=\"#333\"/>\n";
            svg += "<text x=\"" + num(px(s)) + "\" y=\"" + num(bottom + 16) +
                   "\" text-anchor=\"middle\">" + num(s) + "</text>\n";
        }
        for (int g = 0; g <= 4; ++g) {
            const double v = lo + (hi - lo) * g / 4.0;
            svg += "<line x1=\"" + num(left - 4) + "\" y1=\"" + num(py(v)) + "\" x2=\"" + num(left) +
                   "\" y2=\"" + num(py(v)) + "\" stroke=\"#333\"/>\n";
            svg += "<text x=\"" + num(left - 8) + "\" y=\"" + num(py(v) + 4) +
                   "\" text-anchor=\"end\">" + num(std::round(v * 10.0) / 10.0) + "</text>\n";
        }

        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            const Method m = methods[mi];
            std::string seg;
            int seg_points = 0;
            auto flush = [&] {
                if (seg_points >= 2)
                    svg += "<polyline points=\"" + seg + "\" fill=\"none\" stroke=\"" +
                           detail::method_color(m) + "\" stroke-width=\"1.5\"/>\n";
                seg.clear();
                seg_points = 0;
            };
            for (double s : snrs) {
                double v = std::numeric_limits<double>::quiet_NaN();
                for (const ResultRow& r : table.rows)
                    if (r.method == m && r.snr_db == s) v = r.*panel.field;
                if (!std::isfinite(v)) {
                    flush();
                    continue;
                }
                if (!seg.empty()) seg += ' ';
                seg += num(px(s)) + "," + num(py(v));
                ++seg_points;
                svg += "<circle cx=\"" + num(px(s)) + "\" cy=\"" + num(py(v)) + "\" r=\"2.5\" fill=\"" +
                       detail::method_color(m) + "\"/>\n";
            }
            flush();
            const double ly = top + 14 + 16 * static_cast<double>(mi);
            svg += "<line x1=\"" + num(right + 10) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" +
                   num(right + 34) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" +
                   detail::method_color(m) + "\" stroke-width=\"1.5\"/>\n";
            svg += "<text x=\"" + num(right + 38) + "\" y=\"" + num(ly) + "\">" + method_name(m) +
                   "</text>\n";
        }
    }
    svg += "</svg>\n";
    return svg;
}

inline void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw io_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

enum class OutputFormat { csv, svg };

inline void emit_outputs(const ResultTable& table, OutputFormat format, const std::string& path,
                         const std::string& title = {}) {
    if (table.rows.empty()) throw config_error("emit_outputs: empty table");
    write_text_file(path, format == OutputFormat::csv ? results_csv(table)
                                                      : results_svg(table, title));
}

} // namespace risce
