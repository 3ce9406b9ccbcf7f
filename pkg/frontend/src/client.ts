/**
 * WebSocket client for the gateway.
 *
 * One text frame carries one wire line in each direction. The first line on a
 * fresh socket must be HELLO; the server answers `EVT kind=welcome ...` with
 * the session, avatar and role. After that the client subscribes to the event
 * topic, keeps the session alive with periodic PINGs and routes incoming
 * lines to the marker store and user callbacks.
 *
 * The socket is injected behind a minimal interface so tests (and non-browser
 * hosts) can supply their own transport.
 */

import { formatLine, parseLine, ParsedLine, PROTOCOL_VERSION } from "./protocol.js";
import { MarkerStore } from "./markers.js";
import { InterventionForm, buildInterventionLine } from "./intervene.js";

export interface LineSocket {
  send(line: string): void;
  close(): void;
  onmessage: ((line: string) => void) | null;
  onclose: (() => void) | null;
}

export interface Welcome {
  session: number;
  avatar: number;
  role: string;
}

export interface ConsoleClientOptions {
  name: string;
  pass: string;
  device?: string;
  pingEveryMs?: number;
  setInterval?: (fn: () => void, ms: number) => unknown;
  clearInterval?: (handle: unknown) => void;
}

export class ConsoleClient {
  readonly markers = new MarkerStore();
  welcome: Welcome | null = null;

  onEvent: ((line: ParsedLine) => void) | null = null;
  onError: ((line: ParsedLine) => void) | null = null;
  onWelcome: ((welcome: Welcome) => void) | null = null;

  private pingSeq = 0;
  private pingHandle: unknown = null;
  private readonly opts: Required<Pick<ConsoleClientOptions, "device" | "pingEveryMs">> &
    ConsoleClientOptions;

  constructor(
    private socket: LineSocket,
    options: ConsoleClientOptions,
  ) {
    this.opts = { device: "gm-tool", pingEveryMs: 2000, ...options };
    socket.onmessage = (line) => this.receive(line);
    socket.onclose = () => this.stopPinging();
  }

  /** Send the HELLO handshake; the reply arrives via onmessage. */
  open(): void {
    this.socket.send(
      formatLine("HELLO", {
        name: this.opts.name,
        pass: this.opts.pass,
        device: this.opts.device,
        version: PROTOCOL_VERSION,
      }),
    );
  }

  subscribe(topic = "events"): void {
    this.socket.send(formatLine("SUB", { topic }));
  }

  say(channel: string, body: string): void {
    this.socket.send(formatLine("SAY", { channel, body }));
  }

  intervene(form: InterventionForm): void {
    this.socket.send(buildInterventionLine(form));
  }

  requestView(name: string): void {
    this.socket.send(formatLine("view", { name }, true));
  }

  close(): void {
    this.stopPinging();
    this.socket.close();
  }

  private receive(raw: string): void {
    let line: ParsedLine;
    try {
      line = parseLine(raw);
    } catch {
      return;
    }
    if (line.verb === "ERR") {
      this.onError?.(line);
      return;
    }
    if (line.verb === "EVT" && line.fields.kind === "welcome") {
      this.welcome = {
        session: Number(line.fields.session),
        avatar: Number(line.fields.avatar),
        role: line.fields.role,
      };
      this.subscribe();
      this.startPinging();
      this.onWelcome?.(this.welcome);
      return;
    }
    if (line.verb === "EVT") {
      this.markers.apply(raw);
      this.onEvent?.(line);
    }
    // PONGs need no handling: sending the PING already reset the keep-alive.
  }

  private startPinging(): void {
    const set = this.opts.setInterval ?? ((fn, ms) => setInterval(fn, ms));
    this.pingHandle = set(() => {
      this.pingSeq += 1;
      this.socket.send(formatLine("PING", { seq: this.pingSeq }));
    }, this.opts.pingEveryMs);
  }

  private stopPinging(): void {
    if (this.pingHandle !== null) {
      const clear = this.opts.clearInterval ?? ((h) => clearInterval(h as number));
      clear(this.pingHandle);
      this.pingHandle = null;
    }
  }
}
