#pragma once

#include "qsft/common.hpp"
#include "qsft/mdp.hpp"
#include "qsft/dataset_io.hpp"
#include "qsft/envs.hpp"
#include "qsft/tabular.hpp"
#include "qsft/nn.hpp"
#include "qsft/policy.hpp"
#include "qsft/algorithms.hpp"
#include "qsft/eval.hpp"
#include "qsft/verify.hpp"
