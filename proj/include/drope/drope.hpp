#pragma once

#include "drope/analysis.hpp"
#include "drope/config.hpp"
#include "drope/environments.hpp"
#include "drope/errors.hpp"
#include "drope/estimators.hpp"
#include "drope/experiment.hpp"
#include "drope/io.hpp"
#include "drope/learners.hpp"
#include "drope/mdp.hpp"
#include "drope/minimax.hpp"
#include "drope/replication.hpp"
#include "drope/rng.hpp"
#include "drope/seeds.hpp"
#include "drope/simulate.hpp"
#include "drope/verification.hpp"
