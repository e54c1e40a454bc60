#ifndef FSMODEL_H
#define FSMODEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum FsmStatus {
  FsmOk = 0,
  FsmNullArgument = 1,
  FsmInvalidUtf8 = 2,
  FsmParseError = 3,
  FsmTruncateError = 4,
  FsmRelationError = 5,
  FsmInvalidArgument = 6,
  FsmPanic = 7,
} FsmStatus;

/**
 * Relation constructors exposed over the ABI.
 */
typedef enum FsmRelationKind {
  FsmRelationFs = 0,
  FsmRelationComp = 1,
  FsmRelationIdentity = 2,
  /**
   * Collapse the continuum named "H".
   */
  FsmRelationCollapseH = 3,
} FsmRelationKind;

/**
 * Opaque partition (quotient relation).
 */
typedef struct FsmPartition FsmPartition;

/**
 * Opaque parsed compactum spec.
 */
typedef struct FsmSpec FsmSpec;

/**
 * Opaque finite truncation.
 */
typedef struct FsmTruncation FsmTruncation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `len`); returns the full message length in bytes excluding the NUL.
 */
uintptr_t fsm_last_error(char *buf, uintptr_t len);

/**
 * Parses CDL source into a spec handle. The handle must be released with
 * `fsm_spec_free`.
 */
enum FsmStatus fsm_spec_parse(const char *source, struct FsmSpec **out);

void fsm_spec_free(struct FsmSpec *spec);

/**
 * Truncates a spec at depth (N, K, k) with atom granularity `delta`
 * ("p/q"). `allow_empty` != 0 lets zero-depth families instantiate empty.
 */
enum FsmStatus fsm_truncate(const struct FsmSpec *spec,
                            uint32_t ints,
                            uint32_t dyadics,
                            uint32_t words,
                            const char *delta,
                            int allow_empty,
                            struct FsmTruncation **out);

void fsm_truncation_free(struct FsmTruncation *t);

uint64_t fsm_truncation_atom_count(const struct FsmTruncation *t);

uint64_t fsm_truncation_piece_count(const struct FsmTruncation *t);

/**
 * Computes a quotient partition of the truncation.
 */
enum FsmStatus fsm_relation(const struct FsmTruncation *t,
                            enum FsmRelationKind kind,
                            struct FsmPartition **out);

void fsm_partition_free(struct FsmPartition *p);

uint64_t fsm_partition_class_count(const struct FsmPartition *p);

/**
 * Serializes the partition (atom → class map plus closure trace) to JSON.
 * The returned string must be released with `fsm_string_free`.
 */
enum FsmStatus fsm_partition_to_json(const struct FsmPartition *p, char **out);

void fsm_string_free(char *s);

/**
 * Finitely-Suslinian check of the partition at scale (ε, k); writes 1 into
 * `out_pass` when the quotient passes, 0 otherwise.
 */
enum FsmStatus fsm_check_fs(const struct FsmTruncation *t,
                            const struct FsmPartition *p,
                            const char *epsilon,
                            uint32_t k,
                            int *out_pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FSMODEL_H */
