#!/usr/bin/env python3
"""Tour of the diversity metrics on a tiny synthetic corpus.

The headline score is an effective sample count: the exponentiated entropy
of the eigenvalues of the normalized Gram matrix of per-sample gradient
directions. n clones score 1, n mutually orthogonal samples score n, and
everything else lands in between.
"""

import numpy as np

import gvendi as gv

# a corpus of 6 "families": samples within a family share wording and
# solution shape, so their proxy gradients point the same way
corpus = gv.template_corpus(n_families=6, per_family=20, seed=7, name="demo")
print(f"corpus: {len(corpus)} samples, e.g.\n  {corpus[0].input}\n  {corpus[0].output}\n")

model = gv.ProxyModel.create(vocab_size=256, feature_dim=64, hash_seed=101, weight_seed=202)
proj = gv.ProjectionSpec(source_dim=model.n_params, target_dim=128, seed=303)

report = gv.g_vendi(model, proj, corpus)
print(f"gradient-entropy diversity : {report.value:8.3f}   (effective count out of {report.n})")
print(f"embedding vendi            : {gv.embedding_vendi(corpus, dim=4096, seed=404).value:8.3f}")

feats = gv.featurize(model, proj, corpus)
print(f"mean pairwise dissimilarity: {gv.embedding_dissimilarity(feats):8.3f}")
print(f"word-bigram entropy (nats) : {gv.ngram_entropy(corpus, order=2):8.3f}")
print(f"tag entropy (nats)         : {gv.tag_entropy(corpus):8.3f}   (ln 6 = {np.log(6):.3f})")
print(f"mean per-token NLL         : {gv.mean_nll(model, corpus):8.3f}   (ln 256 = {np.log(256):.3f})")

# effective-count semantics: duplicating the whole corpus changes nothing
doubled = gv.Corpus(
    tuple(
        gv.Sample(id=f"{s.id}-copy{r}", input=s.input, output=s.output, tags=s.tags)
        for r in range(2)
        for s in corpus
    ),
    name="doubled",
)
dup = gv.g_vendi(model, proj, doubled)
print(f"\nafter exact duplication    : {dup.value:8.3f}   (unchanged -> counts, not volume)")

# extremes
row = np.zeros((8, 16), dtype=np.float32)
row[:, 0] = 1.0
clones = gv.FeatureMatrix(row, tuple(f"c{i}" for i in range(8)), gv.Provenance("external"))
ortho = gv.FeatureMatrix(np.eye(8, 16, dtype=np.float32), tuple(f"o{i}" for i in range(8)),
                         gv.Provenance("external"))
print(f"\n8 clones score             : {gv.vendi_score(clones):8.3f}")
print(f"8 orthogonal rows score    : {gv.vendi_score(ortho):8.3f}")
