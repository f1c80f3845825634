// poisimex command-line front end.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "poisimex/poisimex.hpp"

namespace px = poisimex;

namespace {

void add_schema_options(CLI::App* cmd, px::InputSchema& s, std::string& area_column) {
    cmd->add_option("--response", s.response, "Response column (lm)");
    cmd->add_option("--time", s.time, "Survival time column (aft)");
    cmd->add_option("--event", s.event, "Event indicator column, 1 = event (aft)");
    cmd->add_option("--count", s.count, "Biomarker count column")->capture_default_str();
    cmd->add_option("--area", area_column, "Core area column");
    cmd->add_option("--constant-area", s.constant_area, "Area used for every row when --area is not given")
        ->capture_default_str();
    cmd->add_option("--covariates", s.covariates, "Error-free covariate columns")->delimiter(',');
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"POI-SIMEX: regression with conditionally Poisson surrogate covariates"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(POISIMEX_VERSION));

    // fit
    px::FitOptions fit;
    std::string fit_model = "aft", fit_correction = "poi-simex", fit_extrapolant = "quadratic", fit_variance = "difference";
    std::string fit_area;
    std::string fit_lambdas;
    auto* c_fit = app.add_subcommand("fit", "Fit a regression with or without POI-SIMEX correction");
    c_fit->add_option("input", fit.input, "Input CSV")->required();
    c_fit->add_option("-o,--output", fit.output, "Report CSV")->required();
    c_fit->add_option("--model", fit_model, "lm | aft")->check(CLI::IsMember({"lm", "aft"}))->capture_default_str();
    c_fit->add_option("--correction", fit_correction, "none | poi-simex")
        ->check(CLI::IsMember({"none", "poi-simex"}))
        ->capture_default_str();
    add_schema_options(c_fit, fit.schema, fit_area);
    c_fit->add_option("--B", fit.simex.B, "Pseudo data sets per lambda")->capture_default_str();
    c_fit->add_option("--lambdas", fit_lambdas, "Comma-separated lambda grid (default 0.5,1,1.5,2)");
    c_fit->add_option("--extrapolant", fit_extrapolant, "linear | quadratic | nonlinear")->capture_default_str();
    c_fit->add_option("--variance", fit_variance, "none | difference | bootstrap")->capture_default_str();
    c_fit->add_flag("--bootstrap", fit.bootstrap, "Add bootstrap standard errors");
    c_fit->add_option("--bootstrap-reps", fit.simex.bootstrap_reps, "Bootstrap resamples")->capture_default_str();
    c_fit->add_option("--seed", fit.simex.seed, "Random seed")->capture_default_str();
    c_fit->add_option("--threads", fit.simex.threads, "Worker threads (0 = all cores)")->capture_default_str();

    // simulate
    px::SimulateOptions sim;
    std::size_t sim_n = 0, sim_reps = 0, sim_batches = 0, sim_B = 0;
    std::uint64_t sim_seed = 0;
    auto* c_sim = app.add_subcommand("simulate", "Run a Monte Carlo study for a catalog scenario or spec file");
    c_sim->add_option("scenario", sim.scenario, "Scenario id, alias, or JSON spec file")->required();
    c_sim->add_option("-o,--output", sim.output, "Report CSV")->required();
    auto* o_n = c_sim->add_option("--n", sim_n, "Sample size override");
    auto* o_reps = c_sim->add_option("--reps", sim_reps, "Replicates override");
    auto* o_batches = c_sim->add_option("--batches", sim_batches, "Batches for Monte Carlo standard errors");
    auto* o_seed = c_sim->add_option("--seed", sim_seed, "Random seed");
    auto* o_B = c_sim->add_option("--B", sim_B, "SIMEX pseudo data sets per lambda");
    c_sim->add_option("--methods", sim.methods, "Comma-separated methods")->delimiter(',');
    c_sim->add_option("--threads", sim.threads, "Worker threads (0 = all cores)")->capture_default_str();
    c_sim->add_flag("--text", sim.text, "Also write an aligned text table");

    // km
    px::KmOptions km;
    auto* c_km = app.add_subcommand("km", "Kaplan-Meier curves and log-rank test");
    c_km->add_option("input", km.input, "Input CSV")->required();
    c_km->add_option("-o,--output", km.output, "Output prefix")->required();
    c_km->add_option("--time", km.time, "Time column")->capture_default_str();
    c_km->add_option("--event", km.event, "Event column")->capture_default_str();
    c_km->add_option("--group", km.group, "Group column");

    // attenuation
    px::AttenuationOptions att;
    auto* c_att = app.add_subcommand("attenuation", "Asymptotic attenuation of the naive slope for gamma densities");
    c_att->add_option("--shape", att.shape, "Gamma shape")->required();
    c_att->add_option("--scale", att.scale, "Gamma scale")->required();
    c_att->add_option("--area", att.area, "Core area")->capture_default_str();
    c_att->add_option("--beta-x", att.beta_x, "Hypothetical true slope")->capture_default_str();

    // gen-synthetic
    px::GenSyntheticOptions gen;
    auto* c_gen = app.add_subcommand("gen-synthetic", "Simulate a cohort-shaped survival dataset with known truth");
    c_gen->add_option("-o,--output", gen.output, "Output CSV")->required();
    c_gen->add_option("--n", gen.spec.n, "Patients")->capture_default_str();
    c_gen->add_option("--beta-x", gen.spec.beta_x, "True biomarker coefficient")->capture_default_str();
    c_gen->add_option("--sigma", gen.spec.sigma, "Log-normal scale")->capture_default_str();
    c_gen->add_option("--x-shape", gen.spec.x_shape, "Gamma shape of the true density")->capture_default_str();
    c_gen->add_option("--x-scale", gen.spec.x_scale, "Gamma scale of the true density")->capture_default_str();
    c_gen->add_option("--censoring", gen.spec.censoring_fraction, "Target censoring fraction")->capture_default_str();
    c_gen->add_option("--seed", gen.seed, "Random seed")->capture_default_str();

    // catalog
    std::string catalog_dir;
    auto* c_cat = app.add_subcommand("catalog", "List built-in scenarios, or export them as JSON files");
    c_cat->add_option("--export", catalog_dir, "Directory to write <id>.json files into");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : px::kExitValidation;
    }

    if (*c_fit) {
        return px::guarded(std::cerr, [&] {
            fit.model = fit_model == "lm" ? px::ModelKind::Linear : px::ModelKind::Aft;
            fit.correction = fit_correction == "none" ? px::Correction::None : px::Correction::PoiSimex;
            if (!fit_area.empty()) fit.schema.area = fit_area;
            fit.simex.extrapolant = px::parse_extrapolant(fit_extrapolant);
            fit.simex.variance_method = px::parse_variance_method(fit_variance);
            if (!fit_lambdas.empty()) {
                fit.simex.lambda_grid.clear();
                std::stringstream ss(fit_lambdas);
                std::string tok;
                while (std::getline(ss, tok, ',')) {
                    try {
                        fit.simex.lambda_grid.push_back(std::stod(tok));
                    } catch (const std::exception&) {
                        throw px::ValidationError("bad lambda '" + tok + "'");
                    }
                }
            }
            return px::cmd_fit(fit, std::cout, std::cerr);
        });
    }
    if (*c_sim) {
        if (*o_n) sim.n = sim_n;
        if (*o_reps) sim.replicates = sim_reps;
        if (*o_batches) sim.batches = sim_batches;
        if (*o_seed) sim.seed = sim_seed;
        if (*o_B) sim.B = sim_B;
        return px::cmd_simulate(sim, std::cout, std::cerr);
    }
    if (*c_km) return px::cmd_km(km, std::cout, std::cerr);
    if (*c_att) return px::cmd_attenuation(att, std::cout, std::cerr);
    if (*c_gen) return px::cmd_gen_synthetic(gen, std::cout, std::cerr);
    if (*c_cat) {
        return px::guarded(std::cerr, [&] {
            for (const auto& [id, spec] : px::scenario_catalog()) {
                if (catalog_dir.empty()) {
                    std::cout << id << '\n';
                    continue;
                }
                std::filesystem::create_directories(catalog_dir);
                px::detail::write_file((std::filesystem::path(catalog_dir) / (id + ".json")).string(),
                                       px::to_json_value(spec).dump(2) + "\n");
            }
            return px::kExitOk;
        });
    }
    return px::kExitValidation;
}
