#pragma once

// Umbrella header.

#include "boaw/artifact.hpp"
#include "boaw/classifiers/model.hpp"
#include "boaw/clustering.hpp"
#include "boaw/codebook.hpp"
#include "boaw/decision_tree.hpp"
#include "boaw/error.hpp"
#include "boaw/evaluation.hpp"
#include "boaw/feature_names.hpp"
#include "boaw/feature_table.hpp"
#include "boaw/matrix.hpp"
#include "boaw/parallel.hpp"
#include "boaw/random.hpp"
#include "boaw/scaler.hpp"
#include "boaw/segmenter.hpp"
#include "boaw/selection.hpp"
#include "boaw/synth.hpp"
#include "boaw/wav.hpp"
#include "boaw/wilcoxon.hpp"
