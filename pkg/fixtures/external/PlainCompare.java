public class PlainCompare {
  public static void main(String[] args) {
    String a = "x";
    String b = "y";
    System.out.println(a.equals(b));
  }
}
