#pragma once

#include "opinion_game/closed_forms.hpp"
#include "opinion_game/dense_matrix.hpp"
#include "opinion_game/errors.hpp"
#include "opinion_game/linalg.hpp"
#include "opinion_game/nash_solver.hpp"
#include "opinion_game/network.hpp"
#include "opinion_game/scenario.hpp"
#include "opinion_game/verification.hpp"
