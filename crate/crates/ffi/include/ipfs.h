#ifndef IPFS_FFI_H
#define IPFS_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Length of a sha2-256 multihash in bytes.
#define IPFS_MULTIHASH_SHA256_LEN 34

// Result of every fallible call.
typedef enum IpfsStatus {
  IPFS_STATUS_OK = 0,
  IPFS_STATUS_NULL_ARGUMENT = 1,
  IPFS_STATUS_INVALID_UTF8 = 2,
  // Malformed hash, path or encoding.
  IPFS_STATUS_INVALID_INPUT = 3,
  // Block, path or name could not be found.
  IPFS_STATUS_NOT_FOUND = 4,
  // Signature or name record failed verification.
  IPFS_STATUS_AUTH = 5,
  IPFS_STATUS_STORE = 6,
  IPFS_STATUS_INTERNAL = 7,
} IpfsStatus;

// A node with its own identity, block store and name records, all in memory.
typedef struct IpfsNode IpfsNode;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a node whose identity is derived from a 32-byte secret.
//
// # Safety
// `secret` must point to 32 readable bytes; `out` must be writable.
enum IpfsStatus ipfs_node_new(const uint8_t *secret, struct IpfsNode **out);

// Releases a node. Null is ignored.
//
// # Safety
// `node` must come from [`ipfs_node_new`] and not be used afterwards.
void ipfs_node_free(struct IpfsNode *node);

// Writes the node's base58 id to `out`.
//
// # Safety
// `node` must be live; `out` must be writable.
enum IpfsStatus ipfs_node_id(struct IpfsNode *node, char **out);

// Adds `len` bytes as a file and writes its base58 hash to `out`.
//
// # Safety
// `data` must point to `len` readable bytes (or be null with `len == 0`).
enum IpfsStatus ipfs_node_add(struct IpfsNode *node,
                              const uint8_t *data,
                              uintptr_t len,
                              char **out);

// Reads the file at `path` (`/ipfs/...`, `/ipns/...` or `<hash>[/name...]`).
// The buffer is released with [`ipfs_bytes_free`].
//
// # Safety
// `path` must be a NUL-terminated string; `out_data` and `out_len` writable.
enum IpfsStatus ipfs_node_cat(struct IpfsNode *node,
                              const char *path,
                              uint8_t **out_data,
                              uintptr_t *out_len);

// Resolves a path to the hash it names, written as `/ipfs/<hash>`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` writable.
enum IpfsStatus ipfs_node_resolve(struct IpfsNode *node, const char *path, char **out);

// Points the node's name at `key` and writes the new sequence number.
//
// # Safety
// `key` must be a NUL-terminated string; `out_sequence` writable or null.
enum IpfsStatus ipfs_node_publish(struct IpfsNode *node, const char *key, uint64_t *out_sequence);

// Message for the last failure on this thread, or null. Valid until the
// next failing call on the same thread.
const char *ipfs_last_error_message(void);

// # Safety
// `s` must come from this library, or be null.
void ipfs_string_free(char *s);

// # Safety
// `data` and `len` must be exactly what [`ipfs_node_cat`] returned.
void ipfs_bytes_free(uint8_t *data, uintptr_t len);

// Probability of sending to a peer with debt ratio `r`.
double ipfs_send_probability(double r);

// Debt ratio of a peer we have sent `bytes_sent` to and received `bytes_recv` from.
double ipfs_debt_ratio(uint64_t bytes_sent, uint64_t bytes_recv);

// Writes the sha2-256 multihash of `data` (34 bytes) to `out`.
//
// # Safety
// `data` must hold `len` bytes; `out` must have room for
// [`IPFS_MULTIHASH_SHA256_LEN`] bytes.
enum IpfsStatus ipfs_multihash_sha256(const uint8_t *data, uintptr_t len, uint8_t *out);

// Encodes an even number of bytes as a proquint phrase.
//
// # Safety
// `data` must hold `len` bytes; `out` writable.
enum IpfsStatus ipfs_proquint_encode(const uint8_t *data, uintptr_t len, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IPFS_FFI_H */
