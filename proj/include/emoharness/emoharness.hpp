#pragma once

#include "emoharness/config.hpp"
#include "emoharness/corpus.hpp"
#include "emoharness/emotion.hpp"
#include "emoharness/error.hpp"
#include "emoharness/evaluation.hpp"
#include "emoharness/hashing.hpp"
#include "emoharness/http_backend.hpp"
#include "emoharness/inference.hpp"
#include "emoharness/prompting.hpp"
#include "emoharness/retrieval.hpp"
#include "emoharness/runner.hpp"
