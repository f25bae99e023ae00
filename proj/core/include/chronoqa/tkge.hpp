#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "chronoqa/params.hpp"
#include "chronoqa/rng.hpp"
#include "chronoqa/tape.hpp"
#include "chronoqa/tkg.hpp"

namespace chronoqa {

// Complex embedding tables in real layout: a row of even width D holds D/2
// complex components; entries [0, D/2) are real parts, [D/2, D) imaginary.

// Reinterprets one real-layout vector as complex components.
std::vector<std::complex<double>> complex_view(std::span<const double> row);

// Real layout of a complex vector (inverse of complex_view).
std::vector<double> real_layout(const std::vector<std::complex<double>>& v);

// phi(e_s, v_r, e_o, t) = Re(sum_j e_s[j] * (v_r[j] * t[j]) * conj(e_o[j]))
// over the complex view. All four vectors share one even dimension.
double tcomplex_score(std::span<const double> e_s, std::span<const double> v_r,
                      std::span<const double> e_o, std::span<const double> t);

// Entity, relation and timestamp tables sharing one dimension D. The rows
// live in a ParamStore so the tables can be trained jointly with the rest of
// a model or frozen behind the same interface. relations_inv holds one
// reciprocal embedding per relation: subject prediction is trained as object
// prediction under the reciprocal relation, so candidates always sit in the
// conjugated slot of the trilinear form, the same slot downstream scoring
// puts them in.
struct TkgeModel {
    int dim = 0;
    Param* entities = nullptr;
    Param* relations = nullptr;
    Param* relations_inv = nullptr;
    Param* times = nullptr;

    static TkgeModel create(ParamStore& store, int num_entities, int num_relations,
                            int num_timestamps, int dim, Rng& rng, double init_stddev = 0.05);

    std::span<const double> entity_row(EntityId e) const;
    std::span<const double> relation_row(RelationId r) const;
    std::span<const double> relation_inv_row(RelationId r) const;
    std::span<const double> time_row(TimeId t) const;
};

// Scores every entity as the object of (s, r, ?, t). Entry i is
// tcomplex_score with entity i in the object slot.
std::vector<double> score_all_objects(const TkgeModel& model, EntityId s, RelationId r, TimeId t);
// Symmetric: every entity as the subject of (?, r, o, t).
std::vector<double> score_all_subjects(const TkgeModel& model, RelationId r, EntityId o, TimeId t);

// Tape-side scoring used during training. Columns are D x 1 in real layout.
Var tape_score_all_objects(Tape& tape, const TkgeModel& model, Var subject_col, Var relation_col,
                           Var time_col);
Var tape_score_all_subjects(Tape& tape, const TkgeModel& model, Var relation_col, Var object_col,
                            Var time_col);

struct PretrainConfig {
    int dim = 64;
    int epochs = 200;
    int batch_size = 32;
    // Embedding-only training tolerates (and generalizes better with) a much
    // larger step than the joint model; calibrated on the default world.
    double learning_rate = 0.1;
    // Geometric per-epoch decay toward this value; equal rates disable decay.
    // The late small-step phase tightens the cross-entropy fit, which widens
    // the ranking margins downstream scoring depends on.
    double final_learning_rate = 0.002;
    uint64_t seed = 1;
    // Fraction of endpoint quadruples held out for the ranking report.
    double holdout_fraction = 0.0;
    // Nuclear 3-norm penalty on the four factors; off by default.
    double nuclear_norm_weight = 0.0;
    // Rescale each finished table to a fixed mean row norm. Cross-entropy
    // training inflates embedding norms arbitrarily; the trilinear ranking is
    // invariant under a uniform per-table scale, so pinning the scale costs
    // nothing and keeps downstream attention logits and candidate scores in a
    // workable range. The target trades attention sharpness (smaller) against
    // candidate-score spread (larger).
    bool rescale_tables = true;
    double rescale_norm = 3.0;
};

struct PretrainReport {
    std::vector<double> epoch_losses;  // mean per-quadruple CE (both directions)
    int eval_count = 0;                // held-out quadruples (train set if none held out)
    double hits1_object = 0.0;
    double hits10_object = 0.0;
    double hits1_subject = 0.0;
    double hits10_subject = 0.0;
};

// Link-prediction pretraining: multiclass cross entropy over the full entity
// set in both the object and the subject direction for every endpoint
// quadruple. Deterministic per seed. Throws ContractError on an empty KG.
TkgeModel pretrain(const TemporalKG& kg, const PretrainConfig& config, ParamStore& store,
                   PretrainReport* report = nullptr);

}  // namespace chronoqa
