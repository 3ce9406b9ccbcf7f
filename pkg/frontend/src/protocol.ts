/**
 * Wire codec for the gateway line protocol.
 *
 * A line is `VERB key=value key=value ...`, newline-terminated on the socket,
 * values percent-encoded. Control lines carry the `#$# ` prefix. The encoder
 * must be byte-compatible with the server side, so percent-encoding is done
 * by hand: every byte outside [A-Za-z0-9_.~-] is escaped with uppercase hex
 * (encodeURIComponent would leave `!*'()` bare and break byte-exactness).
 */

export const OOB_PREFIX = "#$# ";
export const PROTOCOL_VERSION = "1";

export type FieldValue = string | number | boolean;
export type Fields = Record<string, string>;

export interface ParsedLine {
  oob: boolean;
  verb: string;
  fields: Fields;
}

export class ProtocolError extends Error {}

const UNRESERVED = /[A-Za-z0-9_.~-]/;

export function percentEncode(value: string): string {
  const bytes = new TextEncoder().encode(value);
  let out = "";
  for (const byte of bytes) {
    const ch = String.fromCharCode(byte);
    if (byte < 0x80 && UNRESERVED.test(ch)) {
      out += ch;
    } else {
      out += "%" + byte.toString(16).toUpperCase().padStart(2, "0");
    }
  }
  return out;
}

export function percentDecode(value: string): string {
  try {
    return decodeURIComponent(value);
  } catch {
    throw new ProtocolError(`bad percent-encoding in ${JSON.stringify(value)}`);
  }
}

function renderValue(value: FieldValue): string {
  if (typeof value === "boolean") return value ? "true" : "false";
  return String(value);
}

export function formatLine(
  verb: string,
  fields: Record<string, FieldValue> = {},
  oob = false,
): string {
  const parts = [verb];
  for (const [key, value] of Object.entries(fields)) {
    parts.push(`${key}=${percentEncode(renderValue(value))}`);
  }
  const line = parts.join(" ");
  return oob ? OOB_PREFIX + line : line;
}

export function parseLine(raw: string): ParsedLine {
  let line = raw.replace(/[\r\n]+$/, "");
  const oob = line.startsWith(OOB_PREFIX);
  if (oob) line = line.slice(OOB_PREFIX.length);
  if (!line) throw new ProtocolError("empty line");
  const parts = line.split(" ");
  const verb = parts[0];
  const fields: Fields = {};
  for (const part of parts.slice(1)) {
    const eq = part.indexOf("=");
    if (eq < 0) throw new ProtocolError(`malformed field ${JSON.stringify(part)}`);
    fields[part.slice(0, eq)] = percentDecode(part.slice(eq + 1));
  }
  return { oob, verb, fields };
}
