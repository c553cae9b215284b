#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "risce/experiment.hpp"
#include "risce/io.hpp"

using namespace risce;

namespace {

// Small enough to keep the suite fast, large enough that the bilinear stage
// operates in its working regime (per-entry message statistics concentrate
// poorly below ~8 inner dimensions).
ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.scene.users = 8;
    cfg.scene.bs_antennas = 4;
    cfg.scene.ris_elements = 8;
    cfg.scene.slots = 48;
    cfg.scene.phase_configs = 8;
    cfg.scene.sparsity = 0.25;
    cfg.scene.pilot_len = 4;
    cfg.snr_grid_db = {10.0, 20.0};
    cfg.trials = 5;
    cfg.master_seed = 2024;
    cfg.bigamp.damping = 0.7;
    return cfg;
}

} // namespace

TEST_CASE("numeric text round-trips") {
    CHECK(parse_double(format_double(0.1)) == 0.1);
    CHECK(parse_double(format_double(-1e300)) == -1e300);
    CHECK(std::isnan(parse_double(format_double(std::numeric_limits<double>::quiet_NaN()))));
    CHECK(parse_int(format_int(-123456789012345LL)) == -123456789012345LL);
    CHECK(parse_uint("18446744073709551615") == std::numeric_limits<std::uint64_t>::max());
    CHECK_THROWS_AS(parse_double("1.5x"), config_error);
    CHECK_THROWS_AS(parse_int("3.2"), config_error);
    CHECK_THROWS_AS(parse_uint("-1"), config_error);
}

TEST_CASE("method names round-trip") {
    for (Method m : {Method::proposed, Method::lskrf, Method::genie_ls})
        CHECK(method_from_name(method_name(m)) == m);
    CHECK_THROWS_AS(method_from_name("als"), config_error);
}

TEST_CASE("ExperimentConfig validation") {
    ExperimentConfig cfg = small_config();
    cfg.validate();

    cfg.trials = 0;
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = small_config();
    cfg.snr_grid_db.clear();
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = small_config();
    cfg.methods.clear();
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = small_config();
    cfg.snr_grid_db.push_back(std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = small_config();
    cfg.alignment = AlignMode::pilot_ls;
    CHECK_THROWS_AS(cfg.validate(), config_error);
}

TEST_CASE("run_experiment result table shape and health") {
    const ExperimentConfig cfg = small_config();
    std::vector<TrialRecord> records;
    const ResultTable table = run_experiment(cfg, 1, &records);

    REQUIRE(table.rows.size() == cfg.snr_grid_db.size() * cfg.methods.size());
    REQUIRE(records.size() == static_cast<std::size_t>(cfg.trials) * table.rows.size());

    // Failure accounting: every table count must equal the number of
    // divergent or errored records in its cell, never silently dropped.
    for (const ResultRow& row : table.rows) {
        CHECK(row.trials_used == cfg.trials);
        int expected_failures = 0;
        for (const TrialRecord& r : records)
            if (r.method == row.method && r.snr_db == row.snr_db)
                expected_failures += (!r.ok || r.diverged) ? 1 : 0;
        CHECK(row.failures == expected_failures);
        CHECK(row.failures <= cfg.trials / 2); // no abort was raised
        CHECK(std::isfinite(row.nmse_x_db));
    }
    const ResultRow& genie = table.at(Method::genie_ls, 20.0);
    CHECK(std::isnan(genie.nmse_hr_db));
    CHECK(std::isnan(genie.nmse_hs_db));
    CHECK(std::isnan(genie.mean_als_iters));
    CHECK(std::isnan(genie.mean_bigamp_iters));
    const ResultRow& lskrf = table.at(Method::lskrf, 20.0);
    CHECK(std::isnan(lskrf.mean_als_iters));
    CHECK(lskrf.mean_bigamp_iters >= 1.0);
    const ResultRow& prop = table.at(Method::proposed, 20.0);
    CHECK(prop.mean_als_iters >= 1.0);
    CHECK(prop.mean_als_iters <= cfg.als.max_iterations);
    CHECK(std::isfinite(prop.nmse_hr_db));
    CHECK(std::isfinite(prop.nmse_hs_db));
    CHECK_THROWS_AS(table.at(Method::proposed, 99.0), index_error);

    // Records arrive in trial-major order, cells in (snr, method) order.
    const std::size_t cells = table.rows.size();
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(records[i].trial == static_cast<int>(i / cells));
        const std::size_t c = i % cells;
        CHECK(records[i].snr_db == cfg.snr_grid_db[c / cfg.methods.size()]);
        CHECK(records[i].method == cfg.methods[c % cfg.methods.size()]);
        CHECK(records[i].ok);
        CHECK(records[i].seconds == 0.0); // timings off by default
    }
}

TEST_CASE("run_experiment is deterministic across worker counts") {
    const ExperimentConfig cfg = small_config();
    std::vector<TrialRecord> rec1, rec2, rec3;
    const ResultTable t1 = run_experiment(cfg, 1, &rec1);
    const ResultTable t2 = run_experiment(cfg, 2, &rec2);
    const ResultTable t3 = run_experiment(cfg, 3, &rec3);

    CHECK(results_csv(t1) == results_csv(t2));
    CHECK(results_csv(t1) == results_csv(t3));
    CHECK(trials_csv(rec1) == trials_csv(rec2));
    CHECK(trials_csv(rec1) == trials_csv(rec3));
}

TEST_CASE("run_experiment aborts when a cell keeps failing") {
    ExperimentConfig cfg = small_config();
    // Dense columns with three BS antennas against two RIS elements: every
    // data column asks for three unknowns from a rank-two mixing matrix,
    // so every trial fails.
    cfg.scene.ris_elements = 2;
    cfg.scene.phase_configs = 2;
    cfg.scene.bs_antennas = 3;
    cfg.scene.pilot_len = 3;
    cfg.scene.sparsity = 1.0;
    cfg.methods = {Method::genie_ls};
    cfg.trials = 4;
    CHECK_THROWS_AS(run_experiment(cfg, 1), experiment_abort);
}

TEST_CASE("config document round-trips") {
    ExperimentConfig cfg;
    cfg.scene.users = 7;
    cfg.scene.bs_antennas = 3;
    cfg.scene.ris_elements = 5;
    cfg.scene.slots = 64;
    cfg.scene.phase_configs = 9;
    cfg.scene.sparsity = 0.35;
    cfg.scene.pilot_len = 4;
    cfg.scene.signal_var = 2.5;
    cfg.scene.channel_var = 0.5;
    cfg.snr_grid_db = {-5.0, 0.0, 2.5};
    cfg.trials = 17;
    cfg.methods = {Method::lskrf, Method::proposed};
    cfg.als.epsilon = 3e-4;
    cfg.als.max_iterations = 9;
    cfg.als.init = AlsOptions::Init::random;
    cfg.als.random_init_seed = 42;
    cfg.bigamp.epsilon = 1e-7;
    cfg.bigamp.max_iterations = 33;
    cfg.bigamp.damping = 0.7;
    cfg.bigamp.assumed_noise_var = 1e-9;
    cfg.bigamp.variance_floor = 1e-13;
    cfg.alignment = AlignMode::first_row_normalization;
    cfg.master_seed = 987654321;
    cfg.output_path = "out dir/results v2";

    const std::string doc = write_config(cfg);
    const ExperimentConfig back = parse_config(doc);
    CHECK(write_config(back) == doc);
    CHECK(back.output_path == cfg.output_path);
    CHECK(back.methods == cfg.methods);
    CHECK(back.snr_grid_db == cfg.snr_grid_db);
}

TEST_CASE("config parser rejects malformed documents") {
    CHECK_THROWS_AS(parse_config(""), config_error);
    CHECK_THROWS_AS(parse_config("users 4\n"), config_error); // missing header
    CHECK_THROWS_AS(parse_config("risce-config v1\nusers\n"), config_error);
    CHECK_THROWS_AS(parse_config("risce-config v1\nusers 3\nusers 4\n"), config_error);
    CHECK_THROWS_AS(parse_config("risce-config v1\nwat 1\n"), config_error);
    CHECK_THROWS_AS(parse_config("risce-config v1\ntrials abc\n"), config_error);
    CHECK_THROWS_AS(parse_config("risce-config v1\ntrials 1 2\n"), config_error);
    CHECK_THROWS_AS(parse_config("risce-config v1\nals_init newton\n"), config_error);
    CHECK_THROWS_AS(parse_config("risce-config v1\nalignment sideways\n"), config_error);

    const ExperimentConfig ok =
        parse_config("risce-config v1\n# a comment\n\n  trials 9\n");
    CHECK(ok.trials == 9);
}

TEST_CASE("results CSV round-trips including NaN cells") {
    ResultTable table;
    ResultRow a;
    a.method = Method::proposed;
    a.snr_db = 0.0;
    a.nmse_hr_db = -12.5;
    a.nmse_hs_db = -120.0;
    a.nmse_x_db = -33.25;
    a.mean_als_iters = 7.4;
    a.mean_bigamp_iters = 21.0;
    a.trials_used = 500;
    a.failures = 3;
    a.wall_time = 1.25;
    ResultRow b;
    b.method = Method::genie_ls;
    b.snr_db = 5.0;
    b.nmse_hr_db = std::numeric_limits<double>::quiet_NaN();
    b.nmse_hs_db = std::numeric_limits<double>::quiet_NaN();
    b.nmse_x_db = -40.0;
    b.mean_als_iters = std::numeric_limits<double>::quiet_NaN();
    b.mean_bigamp_iters = std::numeric_limits<double>::quiet_NaN();
    b.trials_used = 500;
    b.failures = 0;
    b.wall_time = 0.0;
    table.rows = {a, b};

    const std::string csv = results_csv(table);
    CHECK(csv.substr(0, results_csv_header.size()) == results_csv_header);

    const ResultTable back = parse_results_csv(csv);
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[0].method == Method::proposed);
    CHECK(back.rows[0].nmse_hr_db == -12.5);
    CHECK(back.rows[0].mean_als_iters == 7.4);
    CHECK(back.rows[0].trials_used == 500);
    CHECK(back.rows[0].failures == 3);
    CHECK(back.rows[0].wall_time == 1.25);
    CHECK(std::isnan(back.rows[1].nmse_hr_db));
    CHECK(std::isnan(back.rows[1].mean_bigamp_iters));
    CHECK(back.rows[1].nmse_x_db == -40.0);
    CHECK(results_csv(back) == csv);

    CHECK_THROWS_AS(parse_results_csv("nope\n"), config_error);
    const std::string short_line = std::string(results_csv_header) + "\nproposed,1,2\n";
    CHECK_THROWS_AS(parse_results_csv(short_line), config_error);
}

TEST_CASE("trials CSV lists one line per record") {
    std::vector<TrialRecord> records(2);
    records[0].trial = 0;
    records[0].method = Method::proposed;
    records[0].snr_db = 10.0;
    records[0].ok = true;
    records[0].nmse_hr = 1e-3;
    records[0].als_iters = 11;
    records[1].trial = 1;
    records[1].method = Method::genie_ls;
    records[1].ok = false;

    const std::string csv = trials_csv(records);
    const auto lines = [&] {
        std::vector<std::string> out;
        std::size_t start = 0;
        for (std::size_t i = 0; i < csv.size(); ++i)
            if (csv[i] == '\n') {
                out.push_back(csv.substr(start, i - start));
                start = i + 1;
            }
        return out;
    }();
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == trials_csv_header);
    CHECK(lines[1].find("proposed") != std::string::npos);
    CHECK(lines[1].find(",1,") != std::string::npos); // ok flag
    CHECK(lines[2].find("genie_ls") != std::string::npos);
    CHECK(lines[2].find(",0,") != std::string::npos);
    CHECK(lines[2].find("nan") != std::string::npos); // failed trial keeps NaN metrics
}

TEST_CASE("results SVG renders panels, gaps, and legend") {
    ResultTable table;
    const double snrs[] = {0.0, 10.0, 20.0, 30.0};
    for (double s : snrs) {
        ResultRow p;
        p.method = Method::proposed;
        p.snr_db = s;
        p.nmse_hr_db = -10.0 - s;
        p.nmse_hs_db = -8.0 - s;
        p.nmse_x_db = -12.0 - s;
        table.rows.push_back(p);
        ResultRow l;
        l.method = Method::lskrf;
        l.snr_db = s;
        const bool gap = s == 20.0;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        l.nmse_hr_db = gap ? nan : -5.0 - s;
        l.nmse_hs_db = gap ? nan : -4.0 - s;
        l.nmse_x_db = gap ? nan : -6.0 - s;
        table.rows.push_back(l);
    }

    const std::string svg = results_svg(table, "sweep");
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.rfind("</svg>") != std::string::npos);
    CHECK(svg.find(">proposed<") != std::string::npos);
    CHECK(svg.find(">lskrf<") != std::string::npos);
    CHECK(svg.find("sweep") != std::string::npos);
    CHECK(svg.find("nan") == std::string::npos);

    auto count = [&](std::string_view needle) {
        std::size_t n = 0;
        for (std::size_t pos = svg.find(needle); pos != std::string::npos;
             pos = svg.find(needle, pos + needle.size()))
            ++n;
        return n;
    };
    // proposed: one unbroken polyline per panel; lskrf: the NaN at 20 dB
    // leaves one two-point segment plus a dropped single point.
    CHECK(count("<polyline") == 6);
    CHECK(count("<circle") == 21);
}

TEST_CASE("emit_outputs writes the rendered bytes") {
    ResultTable table;
    ResultRow r;
    r.method = Method::proposed;
    r.snr_db = 0.0;
    r.nmse_hr_db = -10.0;
    r.nmse_hs_db = -9.0;
    r.nmse_x_db = -11.0;
    r.mean_als_iters = 5.0;
    r.mean_bigamp_iters = 20.0;
    r.trials_used = 10;
    table.rows.push_back(r);

    const std::string csv_path = "harness_emit_test.csv";
    const std::string svg_path = "harness_emit_test.svg";
    emit_outputs(table, OutputFormat::csv, csv_path);
    emit_outputs(table, OutputFormat::svg, svg_path, "t");
    CHECK(read_text_file(csv_path) == results_csv(table));
    CHECK(read_text_file(svg_path).find("<svg") == 0);
    std::remove(csv_path.c_str());
    std::remove(svg_path.c_str());

    CHECK_THROWS_AS(emit_outputs(ResultTable{}, OutputFormat::csv, csv_path), config_error);
    CHECK_THROWS_AS(read_text_file("does_not_exist_anywhere.txt"), io_error);
}

TEST_CASE("presets reproduce the study dimensions") {
    const auto fig3 = preset("fig3");
    REQUIRE(fig3.size() == 1);
    CHECK(fig3[0].label == "fig3");
    const SceneConfig& s3 = fig3[0].config.scene;
    CHECK(s3.users == 32);
    CHECK(s3.ris_elements == 16);
    CHECK(s3.bs_antennas == 12);
    CHECK(s3.slots == 100);
    CHECK(s3.phase_configs == 16);
    CHECK(s3.sparsity == 0.2);
    CHECK(s3.pilot_len == 12);
    CHECK(fig3[0].config.trials == 500);
    CHECK(fig3[0].config.methods.size() == 3);
    CHECK(fig3[0].config.als.max_iterations == 15);
    CHECK(fig3[0].config.als.epsilon == 1e-5);
    CHECK(fig3[0].config.bigamp.damping == 0.7);
    CHECK(fig3[0].config.snr_grid_db == std::vector<double>{0, 5, 10, 15, 20, 25, 30});
    fig3[0].config.validate();

    const auto fig4 = preset("fig4");
    REQUIRE(fig4.size() == 1);
    CHECK(fig4[0].config.scene.ris_elements == 20);
    CHECK(fig4[0].config.scene.users == 32);

    const auto fig5 = preset("fig5");
    REQUIRE(fig5.size() == 3);
    CHECK(fig5[0].label == "fig5_m8");
    CHECK(fig5[1].label == "fig5_m12");
    CHECK(fig5[2].label == "fig5_m16");
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(fig5[i].config.scene.users == 16);
        CHECK(fig5[i].config.scene.ris_elements == 32);
        CHECK(fig5[i].config.methods == std::vector<Method>{Method::proposed});
        fig5[i].config.validate();
    }
    CHECK(fig5[0].config.scene.bs_antennas == 8);
    CHECK(fig5[2].config.scene.bs_antennas == 16);

    const auto fig6 = preset("fig6");
    REQUIRE(fig6.size() == 4);
    CHECK(fig6[0].label == "fig6_beta01");
    CHECK(fig6[3].label == "fig6_beta05");
    for (const auto& e : fig6) {
        CHECK(e.config.scene.users == 20);
        CHECK(e.config.scene.ris_elements == 32);
        CHECK(e.config.scene.bs_antennas == 16);
    }
    CHECK(fig6[0].config.scene.sparsity == 0.1);
    CHECK(fig6[1].config.scene.sparsity == 0.2);
    CHECK(fig6[2].config.scene.sparsity == 0.3);
    CHECK(fig6[3].config.scene.sparsity == 0.5);

    CHECK_THROWS_AS(preset("fig7"), config_error);
    CHECK(preset_names() == std::vector<std::string>{"fig3", "fig4", "fig5", "fig6"});
}
