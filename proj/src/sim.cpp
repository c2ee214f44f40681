#include "vofdm/sim.hpp"

#include "vofdm/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

namespace vofdm {

const char* version_string() {
#ifdef VOFDM_GIT_DESCRIBE
    return "vofdm 0.1.0 (" VOFDM_GIT_DESCRIBE ")";
#else
    return "vofdm 0.1.0";
#endif
}

std::string radius_policy_name(RadiusPolicy p) {
    switch (p) {
        case RadiusPolicy::Fixed: return "fixed";
        case RadiusPolicy::Formula: return "formula";
        case RadiusPolicy::RobustFloor: return "robust";
    }
    return "?";
}

RadiusPolicy parse_radius_policy(const std::string& s) {
    if (s == "fixed") return RadiusPolicy::Fixed;
    if (s == "formula") return RadiusPolicy::Formula;
    if (s == "robust") return RadiusPolicy::RobustFloor;
    throw config_error("unknown radius policy '" + s + "' (fixed|formula|robust)");
}

DecoderKind parse_decoder(const std::string& s) {
    if (s == "zf") return DecoderKind::ZF;
    if (s == "mmse") return DecoderKind::MMSE;
    if (s == "ml") return DecoderKind::ML;
    if (s == "pis") return DecoderKind::PIS;
    throw config_error("unknown decoder '" + s + "' (zf|mmse|ml|pis)");
}

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s + ",") {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    return out;
}

std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> out;
    for (const auto& t : split_list(s)) out.push_back(std::stoi(t));
    return out;
}

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& t : split_list(s)) out.push_back(std::stod(t));
    return out;
}

}  // namespace

std::string canonical_spec(const ExperimentSpec& s) {
    std::ostringstream os;
    os << "mode=" << s.mode << ";L=" << join(s.Ls) << ";M=" << join(s.Ms) << ";P=" << join(s.Ps)
       << ";K=" << join(s.Ks) << ";D=" << join(s.Ds) << ";snr_db=" << join(s.snr_dbs)
       << ";decoders=" << join(s.decoders) << ";trials=" << s.trials
       << ";radius=" << radius_policy_name(s.radius_policy) << ";fixed_r=" << s.fixed_radius
       << ";erasure=" << (s.erasure_policy == ErasurePolicy::ExpandRadius ? "expand" : "declare")
       << ";genie=" << (s.genie_channel ? 1 : 0) << ";force_zero_tap=" << (s.force_zero_tap ? 1 : 0);
    return os.str();
}

std::uint64_t spec_hash(const ExperimentSpec& spec) {
    const std::string c = canonical_spec(spec);
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char ch : c) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

void apply_config_line(ExperimentSpec& spec, const std::string& raw) {
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) return;
    if (eq == std::string::npos) throw config_error("config line without '=': " + raw);
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r\n");
        const auto b = s.find_last_not_of(" \t\r\n");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty()) throw config_error("bad config line: " + raw);

    if (key == "mode") spec.mode = val;
    else if (key == "L") spec.Ls = parse_ints(val);
    else if (key == "M") spec.Ms = parse_ints(val);
    else if (key == "P") spec.Ps = parse_ints(val);
    else if (key == "K") spec.Ks = parse_ints(val);
    else if (key == "D") spec.Ds = parse_ints(val);
    else if (key == "snr_db") spec.snr_dbs = parse_doubles(val);
    else if (key == "decoders" || key == "decoder") spec.decoders = split_list(val);
    else if (key == "trials") spec.trials = std::stol(val);
    else if (key == "seed") spec.seed = std::stoull(val);
    else if (key == "out") spec.out = val;
    else if (key == "radius_policy") spec.radius_policy = parse_radius_policy(val);
    else if (key == "fixed_radius") spec.fixed_radius = std::stod(val);
    else if (key == "erasure_policy")
        spec.erasure_policy = val == "declare" ? ErasurePolicy::DeclareErasure : ErasurePolicy::ExpandRadius;
    else if (key == "genie_channel") spec.genie_channel = val == "1" || val == "true";
    else if (key == "force_zero_tap") spec.force_zero_tap = val == "1" || val == "true";
    else if (key == "threads") spec.threads = std::stoi(val);
    else if (key == "channel_file") spec.channel_file = val;
    else if (key == "pilot_file") spec.pilot_file = val;
    else if (key == "sifft.delta") spec.sifft.delta = std::stod(val);
    else if (key == "sifft.Delta") spec.sifft.Delta = std::stod(val);
    else if (key == "sifft.B_factor") spec.sifft.b_factor = std::stoi(val);
    else if (key == "sifft.alpha") spec.sifft.alpha0 = std::stod(val);
    else if (key == "sifft.retries") spec.sifft.retries = std::stoi(val);
    else if (key == "sifft.B_factor_approx") spec.sifft.b_factor_approx = std::stoi(val);
    else if (key == "sifft.alpha_approx") spec.sifft.alpha0_approx = std::stod(val);
    else if (key == "sifft.T_outer") spec.sifft.t_outer = std::stoi(val);
    else if (key == "sifft.T_value_min") spec.sifft.t_value_min = std::stoi(val);
    else throw config_error("unknown config key '" + key + "'");
}

ExperimentSpec load_config(std::istream& is) {
    ExperimentSpec spec;
    std::string line;
    while (std::getline(is, line)) apply_config_line(spec, line);
    return spec;
}

CsvWriter::CsvWriter(std::ostream& os, const ExperimentSpec& spec) : os_(os) {
    os_ << "# " << version_string() << "\n";
    os_ << "# seed=" << spec.seed << "\n";
    os_ << "# spec-hash=0x" << std::hex << spec_hash(spec) << std::dec << "\n";
    os_ << "# spec: " << canonical_spec(spec) << "\n";
    os_ << "mode,L,M,P,K,D,snr_db,decoder,radius_policy,metric,value,trials,stderr\n";
}

void CsvWriter::row(const MetricsRecord& r) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", r.value);
    char se[64];
    std::snprintf(se, sizeof se, "%.4g", r.standard_error);
    char snr[32];
    std::snprintf(snr, sizeof snr, "%g", r.snr_db);
    os_ << r.mode << ',' << r.L << ',' << r.M << ',' << r.P << ',' << r.K << ',' << r.D << ','
        << snr << ',' << r.decoder << ',' << r.radius_policy << ',' << r.metric << ',' << buf
        << ',' << r.trials << ',' << se << "\n";
}

double wilson_half_width(long errors, long total) {
    if (total <= 0) return 0;
    const double z = 1.0, z2 = z * z;
    const double n = static_cast<double>(total);
    const double p = static_cast<double>(errors) / n;
    return z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
}

void parallel_trials(long trials, int threads, const std::function<void(long)>& body) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 1 || trials < 4) {
        for (long t = 0; t < trials; ++t) body(t);
        return;
    }
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&]() {
            for (;;) {
                const long t = next.fetch_add(1);
                if (t >= trials) return;
                body(t);
            }
        });
    for (auto& th : pool) th.join();
}

namespace {

// ---- shared experiment machinery ----

struct BitCounter {
    long bit_errors = 0;
    long bits = 0;
    long vb_errors = 0;
    long vbs = 0;
    long erasures = 0;
    long max_trace = 0;  // sum over VBs of max_m |X^(m)| (for mean computation)

    void add(const BitCounter& o) {
        bit_errors += o.bit_errors;
        bits += o.bits;
        vb_errors += o.vb_errors;
        vbs += o.vbs;
        erasures += o.erasures;
        max_trace += o.max_trace;
    }
};

int popcount_bits(int a, int b, int R) {
    int x = (a ^ b) & ((1 << R) - 1);
    int c = 0;
    while (x) {
        c += x & 1;
        x >>= 1;
    }
    return c;
}

void count_vb(BitCounter& acc, const std::vector<int>& tx, const DecodeResult& res, int R) {
    int errs = 0;
    for (size_t m = 0; m < tx.size(); ++m) errs += popcount_bits(tx[m], res.indices[m], R);
    acc.bit_errors += errs;
    acc.bits += static_cast<long>(tx.size()) * R;
    acc.vb_errors += errs > 0 ? 1 : 0;
    acc.vbs += 1;
    acc.erasures += res.erasure ? 1 : 0;
    long mt = 1;
    for (int c : res.candidate_trace) mt = std::max<long>(mt, c);
    acc.max_trace += mt;
}

struct MeanAccum {
    double sum = 0, sum2 = 0;
    long n = 0;
    void add(double v) {
        sum += v;
        sum2 += v * v;
        ++n;
    }
    void add(const MeanAccum& o) {
        sum += o.sum;
        sum2 += o.sum2;
        n += o.n;
    }
    double mean() const { return n ? sum / n : 0; }
    double se() const {
        if (n < 2) return 0;
        const double var = std::max(0.0, (sum2 - sum * sum / n) / (n - 1));
        return std::sqrt(var / n);
    }
};

MetricsRecord base_record(const std::string& mode, int L, int M, int P, int K, int D,
                          double snr_db, const std::string& decoder,
                          const std::string& rpolicy) {
    MetricsRecord r;
    r.mode = mode;
    r.L = L;
    r.M = M;
    r.P = P;
    r.K = K;
    r.D = D;
    r.snr_db = snr_db;
    r.decoder = decoder;
    r.radius_policy = rpolicy;
    return r;
}

// Random data symbols; pilot VBs (if a plan is given) carry the plan symbols.
CVec make_frame(const VofdmConfig& cfg, const PilotPlan* plan, Rng& rng,
                std::vector<int>* tx_indices) {
    const long N = cfg.N();
    const int Q = cfg.constellation.size();
    CVec X(N);
    if (tx_indices) tx_indices->assign(N, 0);
    std::vector<char> is_pilot(cfg.L, 0);
    if (plan)
        for (int i = 0; i < plan->count(); ++i) is_pilot[plan->indices[i]] = static_cast<char>(i + 1);
    for (int l = 0; l < cfg.L; ++l) {
        if (plan && is_pilot[l]) {
            const CVec& s = plan->symbols[is_pilot[l] - 1];
            for (int m = 0; m < cfg.M; ++m) X[static_cast<long>(l) * cfg.M + m] = s[m];
        } else {
            for (int m = 0; m < cfg.M; ++m) {
                const int q = static_cast<int>(rng.uniform_u64(Q));
                X[static_cast<long>(l) * cfg.M + m] = cfg.constellation.points[q];
                if (tx_indices) (*tx_indices)[static_cast<long>(l) * cfg.M + m] = q;
            }
        }
    }
    return X;
}

// LS-estimate every pilot subchannel of a demodulated frame and assemble H_P.
CVec estimate_H_P(const std::vector<VectorBlock>& Ys, const PilotPlan& plan,
                  const VofdmConfig& cfg) {
    std::vector<CVec> per_pilot;
    per_pilot.reserve(plan.count());
    for (int p = 0; p < plan.count(); ++p) {
        VectorBlock Xp{plan.indices[p], plan.symbols[p]};
        per_pilot.push_back(ls_estimate_cfr(Ys[plan.indices[p]], Xp, plan.indices[p], cfg));
    }
    return assemble_cfr_samples(per_pilot);
}

SparseChannel channel_from_estimate(const ChannelEstimate& est, int max_delay) {
    SparseChannel h;
    h.max_delay = max_delay;
    for (const auto& [c, v] : est.entries)
        if (v != Complex(0, 0)) h.taps.push_back({c, v});
    std::sort(h.taps.begin(), h.taps.end(),
              [](const auto& a, const auto& b) { return a.delay < b.delay; });
    return h;
}

struct PilotPlanCache {
    std::map<std::tuple<int, int, int>, PilotPlan> plans;
    const PilotPlan& get(const VofdmConfig& cfg) {
        const auto key = std::make_tuple(cfg.L, cfg.M, cfg.P);
        auto it = plans.find(key);
        if (it == plans.end()) it = plans.emplace(key, design_pilots(cfg)).first;
        return it->second;
    }
};

void skip_point(std::ostream& os, const std::string& why) { os << "# skipped: " << why << "\n"; }

}  // namespace

int run_rmse_experiment(const ExperimentSpec& spec, std::ostream& os) {
    CsvWriter csv(os, spec);
    const bool exact = spec.mode == "rmse-exact";
    PilotPlanCache plans;
    Rng master(spec.seed);
    int ran = 0;
    long gp = 0;

    for (int L : spec.Ls)
        for (int M : spec.Ms)
            for (int P : spec.Ps)
                for (int K : spec.Ks)
                    for (int D : spec.Ds)
                        for (double snr_db : spec.snr_dbs) {
                            ++gp;
                            VofdmConfig cfg{L, M, P, D};
                            std::ostringstream tag;
                            tag << "L=" << L << " M=" << M << " P=" << P << " K=" << K
                                << " D=" << D << " snr=" << snr_db;
                            try {
                                cfg.validate();
                            } catch (const config_error& e) {
                                skip_point(os, tag.str() + ": " + e.what());
                                continue;
                            }
                            const long MP = static_cast<long>(M) * P;
                            if (D >= MP) {
                                skip_point(os, tag.str() + ": D >= MP, CIR not identifiable");
                                continue;
                            }
                            if (K > D + 1) {
                                skip_point(os, tag.str() + ": K > D+1");
                                continue;
                            }
                            if (!is_pow2(MP)) {
                                skip_point(os, tag.str() + ": MP not a power of two");
                                continue;
                            }
                            const PilotPlan& plan = plans.get(cfg);
                            const NoiseSpec noise =
                                exact ? NoiseSpec::noiseless() : NoiseSpec::from_snr_db(snr_db);
                            const Rng gp_rng = master.substream(gp);

                            struct Slot {
                                double rmse_dense = 0, rmse_sifft = 0, eta_val = 0;
                                double calls = 0, samples = 0;
                                int support_match = 0, finite_eta = 0;
                            };
                            std::vector<Slot> slots(spec.trials);

                            parallel_trials(spec.trials, spec.threads, [&](long t) {
                                Rng rng = gp_rng.substream(t);
                                const SparseChannel h =
                                    sample_sparse_channel(K, D, rng, /*normalize=*/true,
                                                          spec.force_zero_tap);
                                const CVec X = make_frame(cfg, &plan, rng, nullptr);
                                const CVec x = modulate(X, cfg);
                                const CVec y = transmit(x, cfg.cp_len, h, noise, rng);
                                const auto Ys = demodulate(y, cfg);
                                const CVec H_P = estimate_H_P(Ys, plan, cfg);

                                const ChannelEstimate dense = dense_ifft_estimate(H_P, cfg);
                                const CVec hd = dense.dense(MP);
                                const CVec htrue = h.dense(MP);
                                ChannelEstimate se;
                                if (exact)
                                    se = exactly_sparse_ifft(H_P, K, M, P, spec.sifft, rng);
                                else
                                    se = approximately_sparse_ifft(H_P, K, M, P, spec.sifft, rng);

                                Slot& s = slots[t];
                                s.rmse_dense = (hd - htrue).norm() / std::sqrt(static_cast<double>(MP));
                                s.rmse_sifft =
                                    (se.dense(MP) - htrue).norm() / std::sqrt(static_cast<double>(MP));
                                const double ev = eta(hd, K);
                                if (std::isfinite(ev)) {
                                    s.eta_val = ev;
                                    s.finite_eta = 1;
                                }
                                s.calls = static_cast<double>(se.hash_to_bins_calls);
                                s.samples = static_cast<double>(se.cfr_samples_read);
                                s.support_match = se.top_k_support(K) == top_k_coords(hd, K) ? 1 : 0;
                            });

                            MeanAccum rd, rs, ev, calls, samples;
                            long match = 0, finite = 0;
                            for (const Slot& s : slots) {
                                rd.add(s.rmse_dense);
                                rs.add(s.rmse_sifft);
                                calls.add(s.calls);
                                samples.add(s.samples);
                                match += s.support_match;
                                if (s.finite_eta) {
                                    ev.add(s.eta_val);
                                    finite += 1;
                                }
                            }

                            const std::string dec = exact ? "sifft-exact" : "sifft-approx";
                            auto rec = [&](const std::string& metric, double val, double stderr_,
                                           long n) {
                                MetricsRecord r = base_record(spec.mode, L, M, P, K, D, snr_db, dec,
                                                              radius_policy_name(spec.radius_policy));
                                r.metric = metric;
                                r.value = val;
                                r.trials = n;
                                r.standard_error = stderr_;
                                csv.row(r);
                            };
                            rec("rmse_dense", rd.mean(), rd.se(), rd.n);
                            rec("rmse_sifft", rs.mean(), rs.se(), rs.n);
                            if (finite > 0) rec("eta_mean", ev.mean(), ev.se(), finite);
                            rec("support_match_rate", static_cast<double>(match) / spec.trials,
                                wilson_half_width(spec.trials - match, spec.trials), spec.trials);
                            rec("hash_calls_mean", calls.mean(), calls.se(), calls.n);
                            rec("cfr_samples_mean", samples.mean(), samples.se(), samples.n);
                            ++ran;
                        }
    return ran;
}

namespace {

// Decode every VB of a received frame with one decoder; genie channel matrices.
void decode_frame(BitCounter& acc, const std::vector<VectorBlock>& Ys,
                  const std::vector<int>& txidx, const SparseChannel& h, const VofdmConfig& cfg,
                  DecoderKind kind, const DecoderConfig& dcfg) {
    const int R = cfg.constellation.bits();
    std::vector<int> tx(cfg.M);
    for (int l = 0; l < cfg.L; ++l) {
        const BlockedChannelMatrix H = blocked_channel_matrix(h, l, cfg);
        for (int m = 0; m < cfg.M; ++m) tx[m] = txidx[static_cast<long>(l) * cfg.M + m];
        DecodeResult res;
        switch (kind) {
            case DecoderKind::ZF:
                try {
                    res = zf_decode(Ys[l], H, cfg.constellation);
                } catch (const singular_channel_error&) {
                    res.indices.assign(cfg.M, 0);
                    res.erasure = true;
                }
                break;
            case DecoderKind::MMSE:
                res = mmse_decode(Ys[l], H, dcfg.noise.variance, cfg.constellation);
                break;
            case DecoderKind::ML:
                res = ml_decode(Ys[l], H, cfg.constellation);
                break;
            case DecoderKind::PIS:
                res = pis_decode(Ys[l], H, dcfg, cfg.constellation);
                break;
        }
        count_vb(acc, tx, res, R);
    }
}

}  // namespace

int run_ber_experiment(const ExperimentSpec& spec, std::ostream& os) {
    CsvWriter csv(os, spec);
    Rng master(spec.seed);
    int ran = 0;
    long gp = 0;

    std::vector<DecoderKind> kinds;
    for (const auto& d : spec.decoders) kinds.push_back(parse_decoder(d));

    for (int L : spec.Ls)
        for (int M : spec.Ms)
            for (int K : spec.Ks)
                for (int D : spec.Ds)
                    for (double snr_db : spec.snr_dbs) {
                        ++gp;
                        VofdmConfig cfg{L, M, 1, D};
                        std::ostringstream tag;
                        tag << "L=" << L << " M=" << M << " K=" << K << " D=" << D
                            << " snr=" << snr_db;
                        try {
                            cfg.validate();
                        } catch (const config_error& e) {
                            skip_point(os, tag.str() + ": " + e.what());
                            continue;
                        }
                        if (K > D + 1) {
                            skip_point(os, tag.str() + ": K > D+1");
                            continue;
                        }
                        if (M > 63) {
                            skip_point(os, tag.str() + ": M too large for PIS masks");
                            continue;
                        }
                        bool ml_ok = cfg.constellation.bits() * M <= 24;
                        const NoiseSpec noise = NoiseSpec::from_snr_db(snr_db);
                        const Rng gp_rng = master.substream(gp);

                        std::vector<std::vector<BitCounter>> slots(
                            kinds.size(), std::vector<BitCounter>(spec.trials));

                        parallel_trials(spec.trials, spec.threads, [&](long t) {
                            Rng rng = gp_rng.substream(t);
                            const SparseChannel h = sample_sparse_channel(
                                K, D, rng, /*normalize=*/false, spec.force_zero_tap);
                            std::vector<int> txidx;
                            const CVec X = make_frame(cfg, nullptr, rng, &txidx);
                            const CVec x = modulate(X, cfg);
                            const CVec y = transmit(x, cfg.cp_len, h, noise, rng);
                            const auto Ys = demodulate(y, cfg);

                            DecoderConfig dcfg;
                            dcfg.noise = noise;
                            dcfg.radius_policy = spec.radius_policy;
                            dcfg.fixed_radius = spec.fixed_radius;
                            dcfg.erasure_policy = spec.erasure_policy;

                            for (size_t d = 0; d < kinds.size(); ++d) {
                                if (kinds[d] == DecoderKind::ML && !ml_ok) continue;
                                decode_frame(slots[d][t], Ys, txidx, h, cfg, kinds[d], dcfg);
                            }
                        });

                        for (size_t d = 0; d < kinds.size(); ++d) {
                            if (kinds[d] == DecoderKind::ML && !ml_ok) {
                                skip_point(os, tag.str() + ": ML enumeration budget exceeded");
                                continue;
                            }
                            BitCounter total;
                            for (const auto& s : slots[d]) total.add(s);
                            auto rec = [&](const std::string& metric, double val, double se,
                                           long n) {
                                MetricsRecord r =
                                    base_record(spec.mode, L, M, spec.Ps.empty() ? 1 : spec.Ps[0],
                                                K, D, snr_db, spec.decoders[d],
                                                radius_policy_name(spec.radius_policy));
                                r.metric = metric;
                                r.value = val;
                                r.trials = n;
                                r.standard_error = se;
                                csv.row(r);
                            };
                            rec("ber", static_cast<double>(total.bit_errors) / total.bits,
                                wilson_half_width(total.bit_errors, total.bits), total.bits);
                            rec("bler", static_cast<double>(total.vb_errors) / total.vbs,
                                wilson_half_width(total.vb_errors, total.vbs), total.vbs);
                            if (kinds[d] == DecoderKind::PIS) {
                                rec("erasure_rate",
                                    static_cast<double>(total.erasures) / total.vbs,
                                    wilson_half_width(total.erasures, total.vbs), total.vbs);
                                rec("mean_max_candidates",
                                    static_cast<double>(total.max_trace) / total.vbs, 0,
                                    total.vbs);
                            }
                        }
                        ++ran;
                    }
    return ran;
}

int run_diversity_experiment(const ExperimentSpec& spec, std::ostream& os) {
    CsvWriter csv(os, spec);
    Rng master(spec.seed);

    // The six deterministic-coordinate channels of the diversity study.
    const std::vector<std::pair<std::string, std::vector<int>>> channels = {
        {"A", {0}},          {"B", {0, 3}},        {"C", {0, 3, 8}},
        {"D", {0, 3, 9}},    {"E", {0, 3, 9, 19}}, {"F", {0, 3, 9, 22}},
    };
    const int L = spec.Ls[0], M = spec.Ms[0], D = spec.Ds[0];
    VofdmConfig cfg{L, M, 1, D};
    cfg.validate();
    if (M > 63) throw config_error("diversity: M too large");

    long gp = 0;
    for (const auto& [name, coords] : channels) {
        for (double snr_db : spec.snr_dbs) {
            ++gp;
            const NoiseSpec noise = NoiseSpec::from_snr_db(snr_db);
            const Rng gp_rng = master.substream(gp);
            std::vector<BitCounter> slots(spec.trials);

            parallel_trials(spec.trials, spec.threads, [&](long t) {
                Rng rng = gp_rng.substream(t);
                SparseChannel h;
                h.max_delay = D;
                for (int j : coords) h.taps.push_back({j, rng.cnormal(1.0)});
                std::vector<int> txidx;
                const CVec X = make_frame(cfg, nullptr, rng, &txidx);
                const CVec x = modulate(X, cfg);
                const CVec y = transmit(x, cfg.cp_len, h, noise, rng);
                const auto Ys = demodulate(y, cfg);
                DecoderConfig dcfg;
                dcfg.noise = noise;
                dcfg.radius_policy = spec.radius_policy;
                dcfg.fixed_radius = spec.fixed_radius;
                dcfg.erasure_policy = spec.erasure_policy;
                decode_frame(slots[t], Ys, txidx, h, cfg, DecoderKind::PIS, dcfg);
            });

            BitCounter total;
            for (const auto& s : slots) total.add(s);
            MetricsRecord r = base_record(spec.mode, L, M, 1, static_cast<int>(coords.size()), D,
                                          snr_db, "pis", radius_policy_name(spec.radius_policy));
            r.metric = "ber_chan" + name;
            r.value = static_cast<double>(total.bit_errors) / total.bits;
            r.trials = total.bits;
            r.standard_error = wilson_half_width(total.bit_errors, total.bits);
            csv.row(r);
        }

        // Appendix-B rank law echo for this channel at a random data subchannel.
        SparseChannel h;
        h.max_delay = D;
        Rng rng = master.substream(1000 + gp);
        for (int j : coords) h.taps.push_back({j, rng.cnormal(1.0)});
        const int l = 1 + static_cast<int>(rng.uniform_u64(L - 1));
        MetricsRecord r = base_record(spec.mode, L, M, 1, static_cast<int>(coords.size()), D, 0,
                                      "pis", radius_policy_name(spec.radius_policy));
        r.metric = "rank_chan" + name;
        r.value = diversity_rank_check(h, cfg, l);
        r.trials = 1;
        csv.row(r);
    }
    return static_cast<int>(channels.size());
}

int run_joint_experiment(const ExperimentSpec& spec, std::ostream& os) {
    CsvWriter csv(os, spec);
    Rng master(spec.seed);
    PilotPlanCache plans;
    int ran = 0;
    long gp = 0;

    for (int L : spec.Ls)
        for (int M : spec.Ms)
            for (int P : spec.Ps)
                for (int K : spec.Ks)
                    for (int D : spec.Ds)
                        for (double snr_db : spec.snr_dbs) {
                            ++gp;
                            VofdmConfig vcfg{L, M, P, D};
                            std::ostringstream tag;
                            tag << "L=" << L << " M=" << M << " P=" << P << " K=" << K
                                << " D=" << D << " snr=" << snr_db;
                            try {
                                vcfg.validate();
                            } catch (const config_error& e) {
                                skip_point(os, tag.str() + ": " + e.what());
                                continue;
                            }
                            const long MP = static_cast<long>(M) * P;
                            const long N = vcfg.N();
                            if (D >= MP || !is_pow2(MP) || K > D + 1 || M > 63) {
                                skip_point(os, tag.str() + ": infeasible joint point");
                                continue;
                            }
                            // OFDM reference with the same N and the same CFR sample budget.
                            VofdmConfig ocfg{static_cast<int>(N), 1, static_cast<int>(MP), D};
                            ocfg.validate();

                            const PilotPlan& vplan = plans.get(vcfg);
                            const PilotPlan& oplan = plans.get(ocfg);
                            const NoiseSpec noise = NoiseSpec::from_snr_db(snr_db);
                            const Rng gp_rng = master.substream(gp);

                            struct Slot {
                                BitCounter pis_est, pis_genie, mmse_est, zf_est, ofdm;
                                int support_match = 0;
                            };
                            std::vector<Slot> slots(spec.trials);

                            parallel_trials(spec.trials, spec.threads, [&](long t) {
                                Rng rng = gp_rng.substream(t);
                                const SparseChannel h = sample_sparse_channel(
                                    K, D, rng, /*normalize=*/true, spec.force_zero_tap);
                                Slot& s = slots[t];

                                // ---- V-OFDM chain ----
                                {
                                    std::vector<int> txidx;
                                    const CVec X = make_frame(vcfg, &vplan, rng, &txidx);
                                    const CVec x = modulate(X, vcfg);
                                    const CVec y = transmit(x, vcfg.cp_len, h, noise, rng);
                                    const auto Ys = demodulate(y, vcfg);
                                    const CVec H_P = estimate_H_P(Ys, vplan, vcfg);
                                    ChannelEstimate est =
                                        approximately_sparse_ifft(H_P, K, M, P, spec.sifft, rng);
                                    const SparseChannel h_est = channel_from_estimate(
                                        est, static_cast<int>(MP) - 1);
                                    const ChannelEstimate dense = dense_ifft_estimate(H_P, vcfg);

                                    s.support_match = est.top_k_support(K) == h.coords() ? 1 : 0;

                                    DecoderConfig dcfg;
                                    dcfg.noise = noise;
                                    dcfg.radius_policy = spec.radius_policy;
                                    dcfg.fixed_radius = spec.fixed_radius;
                                    dcfg.erasure_policy = spec.erasure_policy;

                                    const SparseChannel h_dense = channel_from_estimate(
                                        dense, static_cast<int>(MP) - 1);

                                    const int R = vcfg.constellation.bits();
                                    std::vector<char> is_pilot(L, 0);
                                    for (int idx : vplan.indices) is_pilot[idx] = 1;
                                    std::vector<int> tx(M);
                                    for (int l = 0; l < L; ++l) {
                                        if (is_pilot[l]) continue;
                                        for (int m = 0; m < M; ++m)
                                            tx[m] = txidx[static_cast<long>(l) * M + m];
                                        // estimated-channel PIS
                                        if (!h_est.taps.empty()) {
                                            const BlockedChannelMatrix He =
                                                blocked_channel_matrix(h_est, l, vcfg);
                                            count_vb(s.pis_est, tx,
                                                     pis_decode(Ys[l], He, dcfg,
                                                                vcfg.constellation),
                                                     R);
                                        }
                                        // genie PIS
                                        const BlockedChannelMatrix Hg =
                                            blocked_channel_matrix(h, l, vcfg);
                                        count_vb(s.pis_genie, tx,
                                                 pis_decode(Ys[l], Hg, dcfg, vcfg.constellation),
                                                 R);
                                        // dense-estimate linear receivers
                                        const BlockedChannelMatrix Hd =
                                            blocked_channel_matrix(h_dense, l, vcfg);
                                        count_vb(s.mmse_est, tx,
                                                 mmse_decode(Ys[l], Hd, noise.variance,
                                                             vcfg.constellation),
                                                 R);
                                        try {
                                            count_vb(s.zf_est, tx,
                                                     zf_decode(Ys[l], Hd, vcfg.constellation), R);
                                        } catch (const singular_channel_error&) {
                                            DecodeResult res;
                                            res.indices.assign(M, 0);
                                            res.erasure = true;
                                            count_vb(s.zf_est, tx, res, R);
                                        }
                                    }
                                }

                                // ---- OFDM reference chain ----
                                {
                                    std::vector<int> txidx;
                                    const CVec X = make_frame(ocfg, &oplan, rng, &txidx);
                                    const CVec x = modulate(X, ocfg);
                                    const CVec y = transmit(x, ocfg.cp_len, h, noise, rng);
                                    const auto Ys = demodulate(y, ocfg);
                                    const CVec H_P = estimate_H_P(Ys, oplan, ocfg);
                                    const ChannelEstimate dense = dense_ifft_estimate(H_P, ocfg);
                                    CVec hd = dense.dense(MP);
                                    CVec hfull = CVec::Zero(N);
                                    hfull.head(MP) = hd;
                                    const CVec H = dft(hfull, /*normalized=*/false);

                                    std::vector<char> is_pilot(N, 0);
                                    for (int idx : oplan.indices) is_pilot[idx] = 1;
                                    const int R = ocfg.constellation.bits();
                                    for (long n = 0; n < N; ++n) {
                                        if (is_pilot[n]) continue;
                                        const Complex eq = std::abs(H[n]) > 1e-12
                                                               ? Ys[n].symbols[0] / H[n]
                                                               : Ys[n].symbols[0];
                                        const int rx = ocfg.constellation.slice_index(eq);
                                        s.ofdm.bit_errors +=
                                            popcount_bits(txidx[n], rx, R);
                                        s.ofdm.bits += R;
                                        s.ofdm.vb_errors += rx != txidx[n] ? 1 : 0;
                                        s.ofdm.vbs += 1;
                                    }
                                }
                            });

                            BitCounter pis_est, pis_genie, mmse_est, zf_est, ofdm;
                            long match = 0;
                            for (const Slot& s : slots) {
                                pis_est.add(s.pis_est);
                                pis_genie.add(s.pis_genie);
                                mmse_est.add(s.mmse_est);
                                zf_est.add(s.zf_est);
                                ofdm.add(s.ofdm);
                                match += s.support_match;
                            }
                            auto rec = [&](const std::string& metric, const BitCounter& c) {
                                if (c.bits == 0) return;
                                MetricsRecord r =
                                    base_record(spec.mode, L, M, P, K, D, snr_db, "joint",
                                                radius_policy_name(spec.radius_policy));
                                r.metric = metric;
                                r.value = static_cast<double>(c.bit_errors) / c.bits;
                                r.trials = c.bits;
                                r.standard_error = wilson_half_width(c.bit_errors, c.bits);
                                csv.row(r);
                            };
                            rec("ber_vofdm_pis_est", pis_est);
                            rec("ber_vofdm_pis_genie", pis_genie);
                            rec("ber_vofdm_mmse_est", mmse_est);
                            rec("ber_vofdm_zf_est", zf_est);
                            rec("ber_ofdm_est", ofdm);
                            MetricsRecord r = base_record(spec.mode, L, M, P, K, D, snr_db,
                                                          "joint",
                                                          radius_policy_name(spec.radius_policy));
                            r.metric = "support_match_rate";
                            r.value = static_cast<double>(match) / spec.trials;
                            r.trials = spec.trials;
                            r.standard_error = wilson_half_width(spec.trials - match, spec.trials);
                            csv.row(r);
                            ++ran;
                        }
    return ran;
}

}  // namespace vofdm
