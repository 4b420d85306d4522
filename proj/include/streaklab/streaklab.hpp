#pragma once

#include "streaklab/error.hpp"
#include "streaklab/exact.hpp"
#include "streaklab/grouping.hpp"
#include "streaklab/inference.hpp"
#include "streaklab/ratio.hpp"
#include "streaklab/sampling.hpp"
#include "streaklab/sequence.hpp"
