#include "dilo/dataset.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "dilo/errors.hpp"

namespace dilo {

using nlohmann::json;

void TrajectoryDataset::validate() const {
    if (meta.obs_dim <= 0) throw DataError("dataset: obs_dim must be positive");
    if (meta.has_actions && meta.act_dim <= 0)
        throw DataError("dataset: has_actions with non-positive act_dim");
    for (size_t i = 0; i < trajectories.size(); ++i) {
        const auto& tr = trajectories[i];
        if (tr.steps.size() < 2)
            throw DataError("dataset: trajectory " + std::to_string(i) + " has fewer than 2 steps");
        for (size_t t = 0; t < tr.steps.size(); ++t) {
            const auto& st = tr.steps[t];
            if (st.obs.size() != meta.obs_dim)
                throw DataError("dataset: obs dim mismatch in trajectory " + std::to_string(i));
            if (meta.has_actions != st.act.has_value())
                throw DataError("dataset: action presence mismatch in trajectory " +
                                std::to_string(i));
            if (st.act && st.act->size() != meta.act_dim)
                throw DataError("dataset: act dim mismatch in trajectory " + std::to_string(i));
            if (st.terminal && t + 1 != tr.steps.size())
                throw DataError("dataset: terminal flag before the last step in trajectory " +
                                std::to_string(i));
        }
    }
}

static json vec_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

void save_dataset(const TrajectoryDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    json header = {{"env", ds.meta.env},
                   {"obs_dim", ds.meta.obs_dim},
                   {"act_dim", ds.meta.act_dim},
                   {"has_actions", ds.meta.has_actions},
                   {"seed", ds.meta.seed}};
    out << header.dump() << '\n';
    for (size_t i = 0; i < ds.trajectories.size(); ++i) {
        const auto& tr = ds.trajectories[i];
        for (size_t t = 0; t < tr.steps.size(); ++t) {
            const auto& st = tr.steps[t];
            json rec = {{"traj", i},
                        {"t", t},
                        {"obs", vec_to_json(st.obs)},
                        {"act", st.act ? vec_to_json(*st.act) : json()},
                        {"term", st.terminal}};
            out << rec.dump() << '\n';
        }
    }
    if (!out) throw IoError("short write to '" + path + "'");
}

static Eigen::VectorXd json_to_vec(const json& arr, int line, const char* field) {
    if (!arr.is_array())
        throw DataError("dataset line " + std::to_string(line) + ": '" + field + "' is not an array");
    Eigen::VectorXd v(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number())
            throw DataError("dataset line " + std::to_string(line) + ": non-numeric entry in '" +
                            field + "'");
        v(i) = arr[i].get<double>();
    }
    return v;
}

static void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                int line) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok)
            throw DataError("dataset line " + std::to_string(line) + ": unknown field '" +
                            it.key() + "'");
    }
    for (const char* k : allowed)
        if (!obj.contains(k))
            throw DataError("dataset line " + std::to_string(line) + ": missing field '" +
                            std::string(k) + "'");
}

TrajectoryDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset '" + path + "'");
    std::string line;
    int line_no = 0;
    TrajectoryDataset ds;
    bool header_seen = false;
    int cur_traj = -1;
    int expect_t = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!header_seen) {
            reject_unknown_keys(rec, {"env", "obs_dim", "act_dim", "has_actions", "seed"}, line_no);
            try {
                ds.meta.env = rec["env"].get<std::string>();
                ds.meta.obs_dim = rec["obs_dim"].get<int>();
                ds.meta.act_dim = rec["act_dim"].get<int>();
                ds.meta.has_actions = rec["has_actions"].get<bool>();
                ds.meta.seed = rec["seed"].get<std::uint64_t>();
            } catch (const json::exception& e) {
                throw DataError("dataset line " + std::to_string(line_no) + ": bad header: " +
                                e.what());
            }
            header_seen = true;
            continue;
        }
        reject_unknown_keys(rec, {"traj", "t", "obs", "act", "term"}, line_no);
        int traj_id, t;
        bool term;
        try {
            traj_id = rec["traj"].get<int>();
            t = rec["t"].get<int>();
            term = rec["term"].get<bool>();
        } catch (const json::exception& e) {
            throw DataError("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
        if (traj_id == cur_traj + 1 && t == 0) {
            ds.trajectories.emplace_back();
            cur_traj = traj_id;
            expect_t = 0;
        }
        if (traj_id != cur_traj || t != expect_t)
            throw DataError("dataset line " + std::to_string(line_no) +
                            ": steps out of order (traj " + std::to_string(traj_id) + ", t " +
                            std::to_string(t) + ")");
        ++expect_t;
        TrajStep st;
        st.obs = json_to_vec(rec["obs"], line_no, "obs");
        if (st.obs.size() != ds.meta.obs_dim)
            throw DataError("dataset line " + std::to_string(line_no) + ": obs has " +
                            std::to_string(st.obs.size()) + " dims, header says " +
                            std::to_string(ds.meta.obs_dim));
        if (rec["act"].is_null()) {
            if (ds.meta.has_actions)
                throw DataError("dataset line " + std::to_string(line_no) +
                                ": null act in a has_actions dataset");
        } else {
            if (!ds.meta.has_actions)
                throw DataError("dataset line " + std::to_string(line_no) +
                                ": act present in an observation-only dataset");
            Eigen::VectorXd a = json_to_vec(rec["act"], line_no, "act");
            if (a.size() != ds.meta.act_dim)
                throw DataError("dataset line " + std::to_string(line_no) + ": act has " +
                                std::to_string(a.size()) + " dims, header says " +
                                std::to_string(ds.meta.act_dim));
            st.act = std::move(a);
        }
        st.terminal = term;
        ds.trajectories[cur_traj].steps.push_back(std::move(st));
    }
    if (!header_seen) throw DataError("dataset '" + path + "': missing header line");
    ds.validate();
    return ds;
}

TrajectoryDataset strip_actions(const TrajectoryDataset& ds) {
    if (!ds.meta.has_actions)
        throw std::invalid_argument("strip_actions: dataset has no actions to strip");
    TrajectoryDataset out = ds;
    out.meta.has_actions = false;
    out.meta.act_dim = 0;
    for (auto& tr : out.trajectories)
        for (auto& st : tr.steps) st.act.reset();
    return out;
}

std::vector<TriplePos> triple_positions(const TrajectoryDataset& ds) {
    std::vector<TriplePos> out;
    for (size_t i = 0; i < ds.trajectories.size(); ++i) {
        const auto& steps = ds.trajectories[i].steps;
        int L = static_cast<int>(steps.size());
        for (int t = 0; t + 2 < L; ++t) out.push_back({static_cast<int>(i), t, false});
        // Absorbing terminal: one synthetic continuation (s_{T-1}, s_T, s_T).
        if (steps.back().terminal) out.push_back({static_cast<int>(i), L - 2, true});
    }
    return out;
}

std::vector<PairPos> pair_positions(const TrajectoryDataset& ds) {
    std::vector<PairPos> out;
    for (size_t i = 0; i < ds.trajectories.size(); ++i) {
        int L = static_cast<int>(ds.trajectories[i].steps.size());
        for (int t = 0; t + 1 < L; ++t) out.push_back({static_cast<int>(i), t});
    }
    return out;
}

static void fill_triple_row(const TrajectoryDataset& ds, const TriplePos& p, int row,
                            TripleBatch& b) {
    const auto& steps = ds.trajectories[p.traj].steps;
    int t1 = p.t + 1;
    int t2 = p.self_loop ? p.t + 1 : p.t + 2;
    b.s.row(row) = steps[p.t].obs;
    b.s_next.row(row) = steps[t1].obs;
    b.s_next2.row(row) = steps[t2].obs;
}

TripleBatch all_triples(const TrajectoryDataset& ds, int source_label) {
    auto pos = triple_positions(ds);
    if (pos.empty()) throw DataError("all_triples: dataset has no valid triple");
    TripleBatch b;
    int dim = ds.meta.obs_dim;
    int n = static_cast<int>(pos.size());
    b.s.resize(n, dim);
    b.s_next.resize(n, dim);
    b.s_next2.resize(n, dim);
    b.source.assign(n, source_label);
    for (int i = 0; i < n; ++i) fill_triple_row(ds, pos[i], i, b);
    return b;
}

PairBatch all_pairs(const TrajectoryDataset& ds, bool with_actions) {
    if (with_actions && !ds.meta.has_actions)
        throw std::invalid_argument("all_pairs: dataset has no actions");
    auto pos = pair_positions(ds);
    if (pos.empty()) throw DataError("all_pairs: no consecutive pairs available");
    PairBatch b;
    int n = static_cast<int>(pos.size());
    b.s.resize(n, ds.meta.obs_dim);
    b.s_next.resize(n, ds.meta.obs_dim);
    b.has_actions = with_actions;
    if (with_actions) b.actions.resize(n, ds.meta.act_dim);
    for (int i = 0; i < n; ++i) {
        const auto& steps = ds.trajectories[pos[i].traj].steps;
        b.s.row(i) = steps[pos[i].t].obs;
        b.s_next.row(i) = steps[pos[i].t + 1].obs;
        if (with_actions) b.actions.row(i) = *steps[pos[i].t].act;
    }
    return b;
}

TripleBatch sample_mixture_triples(const TrajectoryDataset& expert,
                                   const TrajectoryDataset& offline, double beta, int batch,
                                   Rng& rng) {
    if (!(beta > 0.0 && beta <= 1.0))
        throw std::invalid_argument("sample_mixture_triples: beta must lie in (0,1]");
    if (batch < 1) throw std::invalid_argument("sample_mixture_triples: batch must be >= 1");
    if (expert.meta.obs_dim != offline.meta.obs_dim)
        throw DataError("sample_mixture_triples: obs_dim mismatch between datasets");
    auto epos = triple_positions(expert);
    auto opos = triple_positions(offline);
    if (epos.empty()) throw DataError("sample_mixture_triples: expert dataset has no valid triple");
    if (opos.empty())
        throw DataError("sample_mixture_triples: offline dataset has no valid triple");
    TripleBatch b;
    int dim = expert.meta.obs_dim;
    b.s.resize(batch, dim);
    b.s_next.resize(batch, dim);
    b.s_next2.resize(batch, dim);
    b.source.resize(batch);
    for (int i = 0; i < batch; ++i) {
        bool from_expert = rng.bernoulli(beta);
        b.source[i] = from_expert ? 0 : 1;
        if (from_expert)
            fill_triple_row(expert, epos[rng.uniform_int(epos.size())], i, b);
        else
            fill_triple_row(offline, opos[rng.uniform_int(opos.size())], i, b);
    }
    return b;
}

TripleBatch sample_offline_triples(const TrajectoryDataset& offline, int batch, Rng& rng) {
    if (batch < 1) throw std::invalid_argument("sample_offline_triples: batch must be >= 1");
    auto pos = triple_positions(offline);
    if (pos.empty()) throw DataError("sample_offline_triples: dataset has no valid triple");
    TripleBatch b;
    int dim = offline.meta.obs_dim;
    b.s.resize(batch, dim);
    b.s_next.resize(batch, dim);
    b.s_next2.resize(batch, dim);
    b.source.assign(batch, 1);
    for (int i = 0; i < batch; ++i) fill_triple_row(offline, pos[rng.uniform_int(pos.size())], i, b);
    return b;
}

PairBatch sample_d0_pairs(const TrajectoryDataset& expert, const TrajectoryDataset& offline,
                          int batch, Rng& rng, bool include_expert) {
    if (batch < 1) throw std::invalid_argument("sample_d0_pairs: batch must be >= 1");
    if (expert.meta.obs_dim != offline.meta.obs_dim)
        throw DataError("sample_d0_pairs: obs_dim mismatch between datasets");
    auto epos = include_expert ? pair_positions(expert) : std::vector<PairPos>{};
    auto opos = pair_positions(offline);
    size_t total = epos.size() + opos.size();
    if (total == 0) throw DataError("sample_d0_pairs: no consecutive pairs available");
    PairBatch b;
    int dim = offline.meta.obs_dim;
    b.s.resize(batch, dim);
    b.s_next.resize(batch, dim);
    b.has_actions = false;
    for (int i = 0; i < batch; ++i) {
        size_t k = rng.uniform_int(total);
        const TrajectoryDataset& ds = k < epos.size() ? expert : offline;
        const PairPos& p = k < epos.size() ? epos[k] : opos[k - epos.size()];
        const auto& steps = ds.trajectories[p.traj].steps;
        b.s.row(i) = steps[p.t].obs;
        b.s_next.row(i) = steps[p.t + 1].obs;
    }
    return b;
}

PairBatch sample_offline_sas(const TrajectoryDataset& offline, int batch, Rng& rng) {
    if (batch < 1) throw std::invalid_argument("sample_offline_sas: batch must be >= 1");
    if (!offline.meta.has_actions)
        throw std::invalid_argument("sample_offline_sas: dataset has no actions");
    auto pos = pair_positions(offline);
    if (pos.empty()) throw DataError("sample_offline_sas: no consecutive pairs available");
    PairBatch b;
    b.s.resize(batch, offline.meta.obs_dim);
    b.s_next.resize(batch, offline.meta.obs_dim);
    b.actions.resize(batch, offline.meta.act_dim);
    b.has_actions = true;
    for (int i = 0; i < batch; ++i) {
        const PairPos& p = pos[rng.uniform_int(pos.size())];
        const auto& steps = offline.trajectories[p.traj].steps;
        b.s.row(i) = steps[p.t].obs;
        b.s_next.row(i) = steps[p.t + 1].obs;
        b.actions.row(i) = *steps[p.t].act;
    }
    return b;
}

}  // namespace dilo
