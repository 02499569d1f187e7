#pragma once

#include "confgame/error.hpp"
#include "confgame/rng.hpp"
#include "confgame/game_model.hpp"
#include "confgame/io.hpp"
#include "confgame/fixtures.hpp"
#include "confgame/oracle.hpp"
#include "confgame/validate.hpp"
#include "confgame/sieve.hpp"
#include "confgame/moments.hpp"
#include "confgame/smd.hpp"
#include "confgame/ope.hpp"
#include "confgame/learner.hpp"
