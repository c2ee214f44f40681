// Simulation front end: pilot design, channel estimation, single-VB decoding and
// the Monte Carlo sweep harness, all emitting CSV (or plain text) records.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "vofdm/sim.hpp"

namespace {

using namespace vofdm;

constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitInternal = 4;

struct CommonOpts {
    std::string config_file;
    std::string out;
    std::uint64_t seed = 1;
    bool seed_set = false;
    bool out_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_file, "key=value experiment spec file");
    cmd->add_option("--seed", opts.seed, "master RNG seed")->each([&](const std::string&) {
        opts.seed_set = true;
    });
    cmd->add_option("--out", opts.out, "output CSV path (default stdout)")
        ->each([&](const std::string&) { opts.out_set = true; });
}

ExperimentSpec load_spec(const CommonOpts& opts) {
    ExperimentSpec spec;
    if (!opts.config_file.empty()) {
        std::ifstream f(opts.config_file);
        if (!f) throw config_error("cannot open config file " + opts.config_file);
        spec = load_config(f);
    }
    if (opts.seed_set) spec.seed = opts.seed;
    if (opts.out_set) spec.out = opts.out;
    return spec;
}

int run_with_output(const ExperimentSpec& spec, const std::function<int(std::ostream&)>& fn) {
    if (!spec.out.empty()) {
        std::ofstream f(spec.out);
        if (!f) throw config_error("cannot open output file " + spec.out);
        return fn(f);
    }
    return fn(std::cout);
}

SparseChannel obtain_channel(const ExperimentSpec& spec, int K, int D, Rng& rng) {
    if (spec.channel_file) {
        std::ifstream f(*spec.channel_file);
        if (!f) throw config_error("cannot open channel file " + *spec.channel_file);
        return load_channel(f);
    }
    return sample_sparse_channel(K, D, rng, /*normalize=*/true, spec.force_zero_tap);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"broadband V-OFDM sparse-channel estimation and decoding simulator"};
    app.require_subcommand(1);

    CommonOpts opts;
    ExperimentSpec cli;  // flag overrides collected here

    // ---- pilot-design ----
    auto* pd = app.add_subcommand("pilot-design", "emit a per-pilot MSE-minimizing pilot plan");
    int pd_L = 256, pd_M = 4, pd_P = 16;
    pd->add_option("--L", pd_L);
    pd->add_option("--M", pd_M);
    pd->add_option("--P", pd_P);
    add_common(pd, opts);

    // ---- estimate ----
    auto* es = app.add_subcommand("estimate", "estimate one channel from pilots");
    int es_L = 256, es_M = 4, es_P = 16, es_K = 4, es_D = 16;
    double es_snr = 20.0;
    std::string es_method = "approx";
    std::string es_channel_file, es_pilot_file;
    es->add_option("--L", es_L);
    es->add_option("--M", es_M);
    es->add_option("--P", es_P);
    es->add_option("--K", es_K);
    es->add_option("--D", es_D);
    es->add_option("--snr-db", es_snr);
    es->add_option("--method", es_method, "dense|exact|approx");
    es->add_option("--channel-file", es_channel_file);
    es->add_option("--pilot-file", es_pilot_file);
    add_common(es, opts);

    // ---- decode ----
    auto* de = app.add_subcommand("decode", "decode one noisy frame (diagnostic)");
    int de_L = 16, de_M = 4, de_K = 4, de_D = 8;
    double de_snr = 10.0;
    std::string de_decoder = "pis", de_rpolicy = "formula", de_channel_file;
    bool de_genie = true;
    de->add_option("--L", de_L);
    de->add_option("--M", de_M);
    de->add_option("--K", de_K);
    de->add_option("--D", de_D);
    de->add_option("--snr-db", de_snr);
    de->add_option("--decoder", de_decoder, "zf|mmse|ml|pis");
    de->add_option("--radius-policy", de_rpolicy, "fixed|formula|robust");
    de->add_option("--channel-file", de_channel_file);
    de->add_flag("--genie-channel,!--no-genie-channel", de_genie);
    add_common(de, opts);

    // ---- sweep commands share the override set ----
    std::string ov_decoder, ov_rpolicy, ov_channel_file, ov_pilot_file;
    bool ov_genie = false, ov_no_genie = false;
    auto add_sweep_overrides = [&](CLI::App* cmd) {
        cmd->add_option("--decoder", ov_decoder, "decoder list, comma separated");
        cmd->add_option("--radius-policy", ov_rpolicy, "fixed|formula|robust");
        cmd->add_option("--channel-file", ov_channel_file);
        cmd->add_option("--pilot-file", ov_pilot_file);
        cmd->add_flag("--genie-channel", ov_genie);
        cmd->add_flag("--no-genie-channel", ov_no_genie);
        add_common(cmd, opts);
    };
    auto* rm = app.add_subcommand("rmse-sweep", "channel-estimation RMSE sweep");
    std::string rm_path = "both";
    rm->add_option("--path", rm_path, "exact|approx|both");
    add_sweep_overrides(rm);
    auto* bs = app.add_subcommand("ber-sweep", "decoder BER sweep (genie CSI)");
    add_sweep_overrides(bs);
    auto* dv = app.add_subcommand("diversity", "six fixed-coordinate channels, PIS BER");
    add_sweep_overrides(dv);
    auto* jt = app.add_subcommand("joint", "estimation feeding decoding, OFDM reference");
    add_sweep_overrides(jt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (pd->parsed()) {
            VofdmConfig cfg{pd_L, pd_M, pd_P, 0};
            cfg.validate();
            const PilotPlan plan = design_pilots(cfg);
            ExperimentSpec spec = load_spec(opts);
            return run_with_output(spec, [&](std::ostream& os) {
                save_pilot_plan(os, plan);
                return 0;
            });
        }

        if (es->parsed()) {
            ExperimentSpec spec = load_spec(opts);
            if (!es_channel_file.empty()) spec.channel_file = es_channel_file;
            VofdmConfig cfg{es_L, es_M, es_P, es_D};
            cfg.validate();
            const long MP = static_cast<long>(es_M) * es_P;
            if (es_D >= MP) throw infeasible_error("estimate: D >= MP");
            Rng rng(spec.seed);
            const SparseChannel h = obtain_channel(spec, es_K, es_D, rng);
            PilotPlan plan;
            if (!es_pilot_file.empty()) {
                std::ifstream f(es_pilot_file);
                if (!f) throw config_error("cannot open pilot file " + es_pilot_file);
                plan = load_pilot_plan(f, cfg);
            } else {
                plan = design_pilots(cfg);
            }
            const NoiseSpec noise = es_method == "exact" ? NoiseSpec::noiseless()
                                                         : NoiseSpec::from_snr_db(es_snr);

            // one frame through the channel, LS at the pilots, then the estimator
            const int Q = cfg.constellation.size();
            CVec X(cfg.N());
            std::vector<char> is_pilot(cfg.L, 0);
            for (int i = 0; i < plan.count(); ++i) is_pilot[plan.indices[i]] = static_cast<char>(i + 1);
            for (int l = 0; l < cfg.L; ++l)
                for (int m = 0; m < cfg.M; ++m)
                    X[static_cast<long>(l) * cfg.M + m] =
                        is_pilot[l] ? plan.symbols[is_pilot[l] - 1][m]
                                    : cfg.constellation.points[rng.uniform_u64(Q)];
            const CVec x = modulate(X, cfg);
            const CVec y = transmit(x, cfg.cp_len, h, noise, rng);
            const auto Ys = demodulate(y, cfg);
            std::vector<CVec> per_pilot;
            for (int p = 0; p < plan.count(); ++p)
                per_pilot.push_back(ls_estimate_cfr(
                    Ys[plan.indices[p]], VectorBlock{plan.indices[p], plan.symbols[p]},
                    plan.indices[p], cfg));
            const CVec H_P = assemble_cfr_samples(per_pilot);

            ChannelEstimate est;
            if (es_method == "dense")
                est = dense_ifft_estimate(H_P, cfg);
            else if (es_method == "exact")
                est = exactly_sparse_ifft(H_P, es_K, es_M, es_P, spec.sifft, rng);
            else if (es_method == "approx")
                est = approximately_sparse_ifft(H_P, es_K, es_M, es_P, spec.sifft, rng);
            else
                throw config_error("unknown method '" + es_method + "'");

            return run_with_output(spec, [&](std::ostream& os) {
                os << "# method=" << es_method << " seed=" << spec.seed << "\n";
                os << "# true channel:\n";
                save_channel(os, h);
                os << "# estimate (coordinate re im):\n";
                os.precision(12);
                for (const auto& [c, v] : est.entries)
                    os << c << " " << v.real() << " " << v.imag() << "\n";
                const CVec htrue = h.dense(MP);
                os << "# rmse=" << (est.dense(MP) - htrue).norm() / std::sqrt(double(MP)) << "\n";
                if (est.eta) os << "# eta=" << *est.eta << "\n";
                if (est.residual) os << "# residual=" << *est.residual << "\n";
                os << "# hash_to_bins_calls=" << est.hash_to_bins_calls
                   << " cfr_samples_read=" << est.cfr_samples_read
                   << " low_confidence=" << est.low_confidence << "\n";
                return 0;
            });
        }

        if (de->parsed()) {
            ExperimentSpec spec = load_spec(opts);
            if (!de_channel_file.empty()) spec.channel_file = de_channel_file;
            VofdmConfig cfg{de_L, de_M, 1, de_D};
            cfg.validate();
            Rng rng(spec.seed);
            const SparseChannel h = obtain_channel(spec, de_K, de_D, rng);
            const NoiseSpec noise = NoiseSpec::from_snr_db(de_snr);
            const int Q = cfg.constellation.size();
            std::vector<int> txidx(cfg.N());
            CVec X(cfg.N());
            for (long i = 0; i < cfg.N(); ++i) {
                txidx[i] = static_cast<int>(rng.uniform_u64(Q));
                X[i] = cfg.constellation.points[txidx[i]];
            }
            const CVec x = modulate(X, cfg);
            const CVec y = transmit(x, cfg.cp_len, h, noise, rng);
            const auto Ys = demodulate(y, cfg);

            DecoderConfig dcfg;
            dcfg.noise = noise;
            dcfg.radius_policy = parse_radius_policy(de_rpolicy);
            dcfg.kind = parse_decoder(de_decoder);

            return run_with_output(spec, [&](std::ostream& os) {
                long bit_errors = 0, bits = 0;
                const int R = cfg.constellation.bits();
                for (int l = 0; l < cfg.L; ++l) {
                    const BlockedChannelMatrix H = blocked_channel_matrix(h, l, cfg);
                    DecodeResult res;
                    switch (dcfg.kind) {
                        case DecoderKind::ZF: res = zf_decode(Ys[l], H, cfg.constellation); break;
                        case DecoderKind::MMSE:
                            res = mmse_decode(Ys[l], H, noise.variance, cfg.constellation);
                            break;
                        case DecoderKind::ML: res = ml_decode(Ys[l], H, cfg.constellation); break;
                        case DecoderKind::PIS:
                            res = pis_decode(Ys[l], H, dcfg, cfg.constellation);
                            break;
                    }
                    os << "l=" << l << " radius=" << res.radius_used
                       << " erasure=" << res.erasure << " distance=" << res.distance
                       << " candidates=[";
                    for (size_t i = 0; i < res.candidate_trace.size(); ++i)
                        os << (i ? " " : "") << res.candidate_trace[i];
                    os << "]\n";
                    for (int m = 0; m < cfg.M; ++m) {
                        const int tx = txidx[static_cast<long>(l) * cfg.M + m];
                        bit_errors += __builtin_popcount((tx ^ res.indices[m]) & ((1 << R) - 1));
                        bits += R;
                    }
                }
                os << "# ber=" << static_cast<double>(bit_errors) / bits << " (" << bit_errors
                   << "/" << bits << " bits)\n";
                return 0;
            });
        }

        // ---- sweeps ----
        ExperimentSpec spec = load_spec(opts);
        if (!ov_decoder.empty()) {
            spec.decoders.clear();
            std::istringstream ss(ov_decoder);
            std::string tok;
            while (std::getline(ss, tok, ',')) spec.decoders.push_back(tok);
        }
        if (!ov_rpolicy.empty()) spec.radius_policy = parse_radius_policy(ov_rpolicy);
        if (!ov_channel_file.empty()) spec.channel_file = ov_channel_file;
        if (!ov_pilot_file.empty()) spec.pilot_file = ov_pilot_file;
        if (ov_genie) spec.genie_channel = true;
        if (ov_no_genie) spec.genie_channel = false;

        int ran = 0;
        if (rm->parsed()) {
            int total = 0;
            if (rm_path == "exact" || rm_path == "both") {
                spec.mode = "rmse-exact";
                total += run_with_output(spec, [&](std::ostream& os) {
                    return run_rmse_experiment(spec, os);
                });
            }
            if (rm_path == "approx" || rm_path == "both") {
                spec.mode = "rmse-approx";
                ExperimentSpec s2 = spec;
                if (!spec.out.empty() && rm_path == "both") s2.out = spec.out + ".approx";
                total += run_with_output(s2, [&](std::ostream& os) {
                    return run_rmse_experiment(s2, os);
                });
            }
            ran = total;
        } else if (bs->parsed()) {
            spec.mode = "ber-sweep";
            ran = run_with_output(spec,
                                  [&](std::ostream& os) { return run_ber_experiment(spec, os); });
        } else if (dv->parsed()) {
            spec.mode = "diversity";
            ran = run_with_output(
                spec, [&](std::ostream& os) { return run_diversity_experiment(spec, os); });
        } else if (jt->parsed()) {
            spec.mode = "joint";
            ran = run_with_output(
                spec, [&](std::ostream& os) { return run_joint_experiment(spec, os); });
        }
        if (ran == 0) {
            std::cerr << "error: no feasible grid points\n";
            return kExitInfeasible;
        }
        return 0;
    } catch (const infeasible_error& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
